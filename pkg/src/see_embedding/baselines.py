"""Parameter models and reference reconstructions for the comparison methods.

* ``matrix``: low-rank factorization ``E = A @ B`` with ``A: V x k``, ``B: k x d``.
* ``tt``: tensor-train matrix with cores ``(r_{k-1}, n_k, m_k, r_k)`` where
  ``prod n_k >= V`` and ``prod m_k >= d``.
* ``word2ket``: per-word sum of ``r`` Kronecker chains of ``o`` vectors of length ``q``.
* ``morphte``: like word2ket, but chain operands are looked up from per-rank
  morpheme tables shared across the vocabulary.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .embedding import factor_dim
from .tensor_core import kron_chain

KINDS = ("matrix", "tt", "word2ket", "morphte")


def _positive(**dims):
    for name, v in dims.items():
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")


# -- low-rank matrix factorization -----------------------------------------


def lrmf_params(V: int, d: int, k: int) -> int:
    _positive(V=V, d=d, k=k)
    if k > min(V, d):
        raise ValueError(f"rank k={k} exceeds min(V, d)={min(V, d)}")
    return (V + d) * k


def lrmf_rank_for_ratio(V: int, d: int, target_ratio: float) -> int:
    """Largest ``k`` with ``V d / ((V + d) k) >= target_ratio``."""
    if not target_ratio > 1:
        raise ValueError("target ratio must exceed 1")
    _positive(V=V, d=d)
    k = int(V * d // ((V + d) * target_ratio))
    while k >= 1 and V * d < target_ratio * (V + d) * k:
        k -= 1
    if k < 1:
        raise ValueError(f"ratio {target_ratio} unreachable: k=1 gives {V * d / (V + d):.2f}x")
    return min(k, V, d)


def lrmf_reconstruct(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.asarray(A, dtype=np.float64) @ np.asarray(B, dtype=np.float64)


# -- tensor train ----------------------------------------------------------


def _check_tt(core_shapes: Sequence[tuple[int, int]], ranks: Sequence[int]) -> None:
    if len(core_shapes) == 0:
        raise ValueError("need at least one TT core")
    if len(ranks) != len(core_shapes) + 1:
        raise ValueError(f"need {len(core_shapes) + 1} TT ranks, got {len(ranks)}")
    if ranks[0] != 1 or ranks[-1] != 1:
        raise ValueError("TT boundary ranks must be 1")
    for n, m in core_shapes:
        _positive(n=n, m=m)
    for r in ranks:
        _positive(rank=r)


def tt_params(core_shapes: Sequence[tuple[int, int]], ranks: Sequence[int]) -> int:
    """``sum_k r_{k-1} n_k m_k r_k`` over the cores."""
    _check_tt(core_shapes, ranks)
    return sum(ranks[k] * n * m * ranks[k + 1] for k, (n, m) in enumerate(core_shapes))


def tt_random_cores(core_shapes, ranks, seed: int = 0) -> list[np.ndarray]:
    _check_tt(core_shapes, ranks)
    rng = np.random.default_rng(seed)
    return [rng.normal(size=(ranks[k], n, m, ranks[k + 1])) for k, (n, m) in enumerate(core_shapes)]


def tt_reconstruct(cores: Sequence[np.ndarray]) -> np.ndarray:
    """Full ``(prod n_k) x (prod m_k)`` matrix, row index ``(i_1..i_K)`` row-major."""
    out = np.asarray(cores[0], dtype=np.float64)  # (1, N, M, r)
    for core in cores[1:]:
        _, N, M, _ = out.shape
        _, n, m, r = core.shape
        out = np.einsum("aijb,bklc->aikjlc", out, core).reshape(1, N * n, M * m, r)
    return out[0, :, :, 0]


def suggest_factorization(n: int, parts: int = 3) -> tuple[int, ...]:
    """Near-balanced ``parts`` positive integers whose product is at least ``n``.

    Picks the smallest product, breaking ties toward the most balanced split.
    """
    _positive(n=n, parts=parts)
    base = max(1, math.ceil(n ** (1.0 / parts)))
    best = None
    lo = max(1, base - 2)
    for combo in itertools.combinations_with_replacement(range(lo, base + 3), parts):
        prod = math.prod(combo)
        if prod < n:
            continue
        key = (prod, max(combo) - min(combo))
        if best is None or key < best[0]:
            best = (key, tuple(sorted(combo, reverse=True)))
    return best[1]


# -- word2ket --------------------------------------------------------------


def word2ket_params(V: int, r: int, o: int, q: int) -> int:
    _positive(V=V, r=r, o=o, q=q)
    return V * r * o * q


def word2ket_reconstruct(factors: np.ndarray, d: int) -> np.ndarray:
    """``factors``: ``(V, r, o, q)`` per-word vectors; returns ``(V, d)``."""
    V, r, o, q = factors.shape
    if q**o < d:
        raise ValueError("q ** o must cover d")
    out = np.zeros((V, d))
    for w in range(V):
        for j in range(r):
            out[w] += kron_chain(list(factors[w, j]))[:d]
    return out


def word2ket_best(V: int, d: int, target_ratio: float, orders: Sequence[int] = (1, 2, 3, 4),
                  max_rank: int = 64) -> dict[int, int | None]:
    """Per order, the largest rank reaching ``target_ratio`` (``None`` if none does).

    ``q`` is the smallest factor length that covers ``d``, which minimises
    the count for a given order and rank.
    """
    found = {}
    for o in orders:
        q = factor_dim(d, o)
        best = None
        for r in range(1, max_rank + 1):
            if V * d >= target_ratio * word2ket_params(V, r, o, q):
                best = r
        found[o] = best
    return found


# -- MorphTE ---------------------------------------------------------------


def morphte_params(morph_vocab: int, r: int, o: int, q: int, copies: int = 1) -> int:
    """Per-rank morpheme tables: ``morph_vocab * r * q * copies``.

    The order sets how many morphemes a chain takes; it does not add storage.
    """
    _positive(morph_vocab=morph_vocab, r=r, o=o, q=q, copies=copies)
    return morph_vocab * r * q * copies


def morphte_reconstruct(tables: np.ndarray, morph_ids: np.ndarray, d: int) -> np.ndarray:
    """``tables``: ``(copies, r, morph_vocab, q)``; ``morph_ids``: ``(V, o)``."""
    c, r, _, q = tables.shape
    V, o = morph_ids.shape
    out = np.zeros((V, d))
    for w in range(V):
        for i in range(c):
            for j in range(r):
                out[w] += kron_chain([tables[i, j, u] for u in morph_ids[w]])[:d]
    return out


# -- specs -----------------------------------------------------------------


@dataclass(frozen=True)
class BaselineSpec:
    kind: str
    shape: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown baseline kind {self.kind!r}; expected one of {KINDS}")

    def params(self, V: int, d: int) -> int:
        s = self.shape
        if self.kind == "matrix":
            return lrmf_params(V, d, int(s["k"]))
        if self.kind == "tt":
            rows = [int(x) for x in s["row_factors"]]
            cols = [int(x) for x in s["col_factors"]]
            if len(rows) != len(cols):
                raise ValueError("TT row and column factorizations need equal length")
            if math.prod(rows) < V or math.prod(cols) < d:
                raise ValueError("TT factorization does not cover (V, d)")
            ranks = [1] + [int(s["rank"])] * (len(rows) - 1) + [1]
            return tt_params(list(zip(rows, cols)), ranks)
        if self.kind == "word2ket":
            o = int(s["o"])
            return word2ket_params(V, int(s["r"]), o, int(s.get("q", factor_dim(d, o))))
        o = int(s["o"])
        return morphte_params(int(s["morph_vocab"]), int(s["r"]), o,
                              int(s.get("q", factor_dim(d, o))), int(s.get("copies", 1)))

    def label(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.shape.items()))
        return f"{self.kind}({inner})"
