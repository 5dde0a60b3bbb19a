import numpy as np
import pytest

from see_embedding import cli
from see_embedding.config import ConfigError, load_config
from see_embedding.embedding import SeeConfig, init_factors, reconstruct_row
from see_embedding.io import load_factor_store, load_grid_table


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return [line.split("\t") for line in text.splitlines() if line and not line.startswith("#")]


@pytest.fixture
def files(tmp_path, sample_text):
    lex = tmp_path / "lex.txt"
    lex.write_text(sample_text, encoding="utf-8")
    tok = tmp_path / "tokens.txt"
    tok.write_text("chair\npower\nunkindly\n", encoding="utf-8")
    return lex, tok


class TestCompile:
    def test_stats(self, capsys, tmp_path, files):
        lex, tok = files
        code, out, _ = run(capsys, "compile", "--lexicon", lex, "--tokens", tok, "--r", 5, "--o", 3,
                           "--out", tmp_path / "g.bin")
        assert code == 0
        stats = dict(rows(out)[1:])
        assert stats["truncated_senses"] == "1"
        assert float(stats["oov_fraction"]) == pytest.approx(1 / 3)
        assert load_grid_table(tmp_path / "g.bin").grids.shape == (3, 5, 3)

    def test_missing_file(self, capsys, tmp_path, files):
        _, tok = files
        code, _, err = run(capsys, "compile", "--lexicon", tmp_path / "nope.txt", "--tokens", tok,
                           "--out", tmp_path / "g.bin")
        assert code == 2 and "not found" in err

    def test_parse_error(self, capsys, tmp_path, files):
        _, tok = files
        bad = tmp_path / "bad.txt"
        bad.write_text("chair\tchair\tfoo|\n", encoding="utf-8")
        code, _, err = run(capsys, "compile", "--lexicon", bad, "--tokens", tok, "--out", tmp_path / "g.bin")
        assert code == 2 and "line 1" in err

    def test_byte_identical(self, capsys, tmp_path, files):
        lex, tok = files
        for name in ("a.bin", "b.bin"):
            run(capsys, "compile", "--lexicon", lex, "--tokens", tok, "--out", tmp_path / name)
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
        assert (tmp_path / "a.stats.tsv").read_bytes() == (tmp_path / "b.stats.tsv").read_bytes()


class TestMaterialize:
    def test_round_trip(self, capsys, tmp_path, files):
        lex, tok = files
        run(capsys, "compile", "--lexicon", lex, "--tokens", tok, "--r", 4, "--o", 2, "--out", tmp_path / "g.bin")
        assert run(capsys, "init", "--grids", tmp_path / "g.bin", "--d", 10, "--m", 2, "--seed", 5,
                   "--out", tmp_path / "f.bin")[0] == 0
        for name in ("a.npy", "b.npy"):
            code, _, _ = run(capsys, "materialize", "--grids", tmp_path / "g.bin", "--store", tmp_path / "f.bin",
                             "--d", 10, "--out", tmp_path / name)
            assert code == 0
        assert (tmp_path / "a.npy").read_bytes() == (tmp_path / "b.npy").read_bytes()
        mat = np.load(tmp_path / "a.npy")
        table, store = load_grid_table(tmp_path / "g.bin"), load_factor_store(tmp_path / "f.bin")
        cfg = SeeConfig(d=10, o=2, r=4, m=2, unit_count=store.unit_count)
        for i, w in enumerate(table.tokens):
            assert mat[i].tolist() == reconstruct_row(table.grid(w), store, cfg).tolist()

    def test_missing_store(self, capsys, tmp_path, files):
        lex, tok = files
        run(capsys, "compile", "--lexicon", lex, "--tokens", tok, "--out", tmp_path / "g.bin")
        code, _, _ = run(capsys, "materialize", "--grids", tmp_path / "g.bin", "--store", tmp_path / "none.bin",
                         "--out", tmp_path / "x.npy")
        assert code == 2


class TestCount:
    def test_reference_budget(self, capsys):
        code, out, _ = run(capsys, "count")
        assert code == 0
        table = rows(out)
        assert table[1][2] == "23691264"
        see = [r for r in table if r[0] == "see"]
        assert [r[3] for r in see] == ["10.08", "20.16", "45.35", "90.70"]
        assert [r[2] for r in see] == ["2350800", "1175400", "522400", "261200"]
        assert out.startswith("# config_hash=")

    def test_invalid_order(self, capsys):
        assert run(capsys, "count", "--o", 0)[0] == 2

    def test_with_baselines(self, capsys, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text(
            "[see]\nm = 9\n\n[baseline.lrmf]\nkind = matrix\nk = 50\n\n"
            "[baseline.w2k]\nkind = word2ket\nr = 1\no = 2\n\n"
            "[baseline.tt]\nkind = tt\nrow_factors = 38x36x34\ncol_factors = 8x8x8\nrank = 16\n\n"
            "[baseline.morph]\nkind = morphte\nmorph_vocab = 14000\nr = 5\no = 3\ncopies = 2\n",
            encoding="utf-8")
        code, out, _ = run(capsys, "count", "--config", cfg)
        assert code == 0
        by_kind = {r[0]: r for r in rows(out)[1:]}
        assert by_kind["matrix"][2] == "2339200"
        assert by_kind["word2ket"][2] == "2128512"
        assert by_kind["morphte"][2] == str(14000 * 5 * 8 * 2)
        assert by_kind["tt"][2] == str(38 * 8 * 16 + 16 * 36 * 8 * 16 + 16 * 34 * 8)

    def test_see_only_when_no_baselines(self, capsys):
        kinds = {r[0] for r in rows(run(capsys, "count", "--m", 9)[1])[1:]}
        assert kinds == {"original", "see"}

    def test_deterministic(self, capsys):
        assert run(capsys, "count")[1] == run(capsys, "count")[1]


class TestSolveRatio:
    @pytest.mark.parametrize("target,m,k", [(10, 18, 50), (80, 2, 6)])
    def test_choices(self, capsys, target, m, k):
        code, out, _ = run(capsys, "solve-ratio", "--target", target)
        table = rows(out)
        assert code == 0 and table[1][1] == f"m={m}" and table[2][1] == f"k={k}"

    def test_unreachable(self, capsys):
        assert run(capsys, "solve-ratio", "--target", 1e7)[0] == 2


class TestGradcheck:
    def test_default_passes(self, capsys):
        code, out, _ = run(capsys, "gradcheck", "--trials", 50)
        assert code == 0
        assert all(float(r[1]) < 1e-6 for r in rows(out)[1:])

    def test_injected_bug_fails(self, capsys):
        code, out, _ = run(capsys, "gradcheck", "--trials", 5, "--inject-bug")
        assert code == 1 and "FAIL" in out

    def test_zero_trials(self, capsys):
        assert run(capsys, "gradcheck", "--trials", 0)[0] == 2


class TestSweep:
    def test_rank_constant(self, capsys):
        table = rows(run(capsys, "sweep", "--axis", "rank", "--values", "1,2,3,4,5,6,7,8,9,10", "--m", 9)[1])
        assert {r[2] for r in table[1:]} == {"1175400"}
        morph = [int(r[4]) for r in table[1:]]
        assert morph == [morph[0] * v for v in range(1, 11)]

    def test_order_decreasing(self, capsys):
        table = rows(run(capsys, "sweep", "--axis", "order", "--values", "1,2,3,4,5,6")[1])
        params = [int(r[2]) for r in table[1:]]
        assert all(a > b for a, b in zip(params, params[1:]))

    def test_m_ratio_decreasing(self, capsys):
        table = rows(run(capsys, "sweep", "--axis", "m", "--values", "1,2,4,9,18")[1])
        ratios = [float(r[3]) for r in table[1:]]
        assert all(a > b for a, b in zip(ratios, ratios[1:]))


SMALL_RUN = """
[run]
seed = 1

[task]
V = 120
num_sememes = 24
n_train = 200
n_test = 60

[train]
teacher_epochs = 3
epochs = 3
d = 16
student_m = 1
"""


class TestTrainDistill:
    def test_train_outputs(self, capsys, tmp_path, monkeypatch):
        cfg = tmp_path / "run.ini"
        cfg.write_text(SMALL_RUN, encoding="utf-8")
        monkeypatch.setenv(cli.ENV_OUTPUT_DIR, str(tmp_path / "out"))
        code, out, _ = run(capsys, "train", "--config", cfg)
        assert code == 0
        assert {p.name for p in (tmp_path / "out").iterdir()} >= {"config.json", "teacher_metrics.tsv", "teacher.ckpt"}

    def test_distill_seeded_rerun(self, capsys, tmp_path, monkeypatch):
        cfg = tmp_path / "run.ini"
        # d=64 keeps the small vocabulary above the 5x compression floor
        cfg.write_text(SMALL_RUN.replace("d = 16", "d = 64"), encoding="utf-8")
        outs = []
        for name in ("a", "b"):
            monkeypatch.setenv(cli.ENV_OUTPUT_DIR, str(tmp_path / name))
            code, out, _ = run(capsys, "distill", "--config", cfg)
            assert code == 0, out
            outs.append((tmp_path / name / "losses.tsv").read_bytes())
        assert outs[0] == outs[1]
        header = outs[0].decode().splitlines()[0]
        assert "student_embedding_params=" in header

    def test_bad_config(self, capsys, tmp_path):
        cfg = tmp_path / "bad.ini"
        cfg.write_text("[train]\nbogus = 1\n", encoding="utf-8")
        assert run(capsys, "distill", "--config", cfg)[0] == 2
        cfg.write_text("[nosuch]\nx = 1\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(cfg)

    def test_flags_override_file(self, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[see]\nm = 4\n", encoding="utf-8")
        base = load_config(cfg)
        assert base.m == (4,)
        assert base.override(m=(2,)).m == (2,)
