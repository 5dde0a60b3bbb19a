import numpy as np
import pytest

from see_embedding.embedding import SeeConfig, init_factors
from see_embedding.io import (FormatError, load_factor_store, load_grid_table, read_container,
                              save_factor_store, save_grid_table, write_container)
from see_embedding.lexicon import build_unit_vocab, compile_table


def test_factor_store_bit_exact(tmp_path):
    store = init_factors(SeeConfig(d=27, o=3, r=4, m=3, unit_count=40, seed=9))
    save_factor_store(tmp_path / "f.bin", store)
    back = load_factor_store(tmp_path / "f.bin")
    assert back.params.tobytes() == store.params.tobytes()
    assert back.seed == 9
    header, _ = read_container(tmp_path / "f.bin", "factor_store")
    assert header["meta"] == {"unit_count": 40, "m": 3, "q": 3, "seed": 9}
    assert header["format_version"] == 1


def test_factor_store_float32(tmp_path):
    store = init_factors(SeeConfig(d=8, o=3, r=2, m=1, unit_count=5))
    save_factor_store(tmp_path / "f.bin", store, float32=True)
    back = load_factor_store(tmp_path / "f.bin")
    assert back.params.dtype == np.float64
    np.testing.assert_array_equal(back.params, store.params.astype(np.float32).astype(np.float64))


def test_grid_table_round_trip(tmp_path, sample_lex):
    tokens = ["chair", "power", "zzzqx"]
    vocab = build_unit_vocab(sample_lex, tokens)
    table = compile_table(sample_lex, tokens, vocab, 5, 3)
    save_grid_table(tmp_path / "g.bin", table, vocab.units)
    back = load_grid_table(tmp_path / "g.bin")
    assert back.tokens == table.tokens
    assert np.array_equal(back.grids, table.grids)
    assert back.oov.tolist() == [False, False, True]
    assert back.dropped_senses.tolist() == [0, 1, 0]
    meta = read_container(tmp_path / "g.bin")[0]["meta"]
    assert (meta["r"], meta["o"], meta["V"], meta["vocab_size"]) == (5, 3, 3, vocab.size)


def test_write_is_byte_stable(tmp_path):
    arrays = {"a": np.arange(6, dtype=np.int32).reshape(2, 3), "b": np.linspace(0, 1, 4)}
    write_container(tmp_path / "1", "x", {"k": 1}, arrays)
    write_container(tmp_path / "2", "x", {"k": 1}, arrays)
    assert (tmp_path / "1").read_bytes() == (tmp_path / "2").read_bytes()


def test_rejects_wrong_kind_and_garbage(tmp_path):
    write_container(tmp_path / "x", "grid_table", {}, {})
    with pytest.raises(FormatError):
        read_container(tmp_path / "x", "factor_store")
    (tmp_path / "y").write_bytes(b"not a container")
    with pytest.raises(FormatError):
        read_container(tmp_path / "y")
    data = (tmp_path / "x").read_bytes()
    (tmp_path / "z").write_bytes(data + b"\0")
    with pytest.raises(FormatError, match="trailing"):
        read_container(tmp_path / "z")
