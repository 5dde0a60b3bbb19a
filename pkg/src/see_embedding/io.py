"""Versioned binary container shared by grid tables, factor stores and checkpoints.

Layout: the magic bytes, a little-endian uint64 header length, a UTF-8 JSON
header (sorted keys), then each array's raw little-endian C-order bytes in
header order. Output depends only on the inputs, so writes are byte-stable.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .embedding import FactorStore, SeeConfig
from .lexicon import GridTable

MAGIC = b"SEEBIN\x00\n"
FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


def write_container(path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    entries, blobs = [], []
    for name, a in arrays.items():
        a = np.ascontiguousarray(a)
        le = a.astype(a.dtype.newbyteorder("<"), copy=False)
        entries.append({"name": name, "dtype": le.dtype.str, "shape": list(a.shape)})
        blobs.append(le.tobytes(order="C"))
    header = {"kind": kind, "format_version": FORMAT_VERSION, "meta": meta, "arrays": entries}
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(raw)))
        fh.write(raw)
        for b in blobs:
            fh.write(b)


def read_container(path, kind: str | None = None) -> tuple[dict, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise FormatError(f"{path}: not a container file")
    off = len(MAGIC)
    (n,) = struct.unpack_from("<Q", data, off)
    off += 8
    header = json.loads(data[off:off + n].decode("utf-8"))
    off += n
    if header.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {header.get('format_version')}")
    if kind is not None and header["kind"] != kind:
        raise FormatError(f"{path}: expected a {kind!r} file, found {header['kind']!r}")
    arrays = {}
    for e in header["arrays"]:
        dt = np.dtype(e["dtype"])
        count = int(np.prod(e["shape"], dtype=np.int64))
        a = np.frombuffer(data, dtype=dt, count=count, offset=off).reshape(e["shape"])
        arrays[e["name"]] = a.astype(dt.newbyteorder("="))
        off += count * dt.itemsize
    if off != len(data):
        raise FormatError(f"{path}: {len(data) - off} trailing bytes")
    return header, arrays


def save_grid_table(path, table: GridTable, units: list[str] | None = None) -> None:
    meta = {"r": table.r, "o": table.o, "V": len(table), "vocab_size": table.vocab_size,
            "tokens": list(table.tokens)}
    if units is not None:
        meta["units"] = list(units)
    write_container(path, "grid_table", meta, {
        "grids": table.grids.astype(np.int32),
        "oov": table.oov.astype(np.uint8),
        "dropped_senses": table.dropped_senses.astype(np.int32),
    })


def load_grid_table(path) -> GridTable:
    header, a = read_container(path, "grid_table")
    meta = header["meta"]
    grids = a["grids"].astype(np.int64)
    if grids.shape != (meta["V"], meta["r"], meta["o"]):
        raise FormatError(f"{path}: grid block shape does not match header")
    return GridTable(tuple(meta["tokens"]), grids, a["oov"].astype(bool),
                     a["dropped_senses"].astype(np.int64), int(meta["vocab_size"]))


def save_factor_store(path, store: FactorStore, float32: bool = False) -> None:
    """Write the factor block; ``float32`` stores a reduced-precision copy."""
    meta = {"unit_count": store.unit_count, "m": store.m, "q": store.q, "seed": store.seed}
    block = store.params.astype(np.float32 if float32 else np.float64)
    write_container(path, "factor_store", meta, {"params": block})


def load_factor_store(path) -> FactorStore:
    header, a = read_container(path, "factor_store")
    meta = header["meta"]
    params = a["params"].astype(np.float64)
    if params.shape != (meta["unit_count"], meta["m"], meta["q"]):
        raise FormatError(f"{path}: parameter block shape does not match header")
    return FactorStore(params, seed=int(meta["seed"]))


def config_meta(cfg: SeeConfig) -> dict:
    return {"d": cfg.d, "o": cfg.o, "r": cfg.r, "m": cfg.m, "unit_count": cfg.unit_count,
            "seed": cfg.seed, "target_var": cfg.target_var}
