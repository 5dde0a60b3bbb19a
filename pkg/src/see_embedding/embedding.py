"""The sememe-entanglement embedding layer.

A word's embedding is a sum over ``m`` factor copies and ``r`` grid rows of
Kronecker chains of small factor vectors, one per unit id in the row::

    e = sum_i sum_j kron(v[g[j,0], i], ..., v[g[j,o-1], i])[:d]

Factors live in one ``(unit_count, m, q)`` block shared by every word, so
the parameter count depends on the unit vocabulary, ``q`` and ``m`` only.
"""
from __future__ import annotations

import string
from dataclasses import dataclass, field, replace

import numpy as np

from .lexicon import ZERO_ID, GridTable, IndexGrid
from .tensor_core import kron_chain, kron_chain_backward


def factor_dim(d: int, o: int) -> int:
    """Smallest integer ``q`` with ``q ** o >= d``."""
    if d < 1 or o < 1:
        raise ValueError("d and o must be positive")
    q = max(1, int(round(d ** (1.0 / o))))
    while q**o < d:
        q += 1
    while q > 1 and (q - 1) ** o >= d:
        q -= 1
    return q


@dataclass(frozen=True)
class SeeConfig:
    """Layer shape. Defaults: d=512, order 3, rank 5, 9 copies, 16325 trainable units."""

    d: int = 512
    o: int = 3
    r: int = 5
    m: int = 9
    unit_count: int = 16326
    seed: int = 0
    target_var: float | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be positive")
        if self.o < 1:
            raise ValueError("order o must be >= 1")
        if self.r < 1:
            raise ValueError("rank r must be >= 1")
        if self.m < 1:
            raise ValueError("copies m must be >= 1")
        if self.unit_count < 2:
            raise ValueError("unit_count must include the two reserved units")
        if self.target_var is not None and not self.target_var > 0:
            raise ValueError("target_var must be positive")

    @property
    def q(self) -> int:
        return factor_dim(self.d, self.o)

    @property
    def variance(self) -> float:
        return 1.0 / self.d if self.target_var is None else self.target_var

    @property
    def init_std(self) -> float:
        return (self.variance / (self.r * self.m)) ** (1.0 / (2 * self.o))


@dataclass
class FactorStore:
    """Trainable factor block of shape ``(unit_count, m, q)``.

    Row ``ZERO_ID`` is frozen at zero; :meth:`apply` keeps it that way.
    """

    params: np.ndarray
    seed: int = 0
    frozen_zero: bool = field(default=True)

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.params.ndim != 3:
            raise ValueError("factor block must be 3-D (unit_count, m, q)")
        if self.frozen_zero and np.any(self.params[ZERO_ID] != 0):
            raise ValueError("ZERO_ID row must be all zeros")

    @property
    def unit_count(self) -> int:
        return self.params.shape[0]

    @property
    def m(self) -> int:
        return self.params.shape[1]

    @property
    def q(self) -> int:
        return self.params.shape[2]

    def apply(self, delta: np.ndarray) -> None:
        """In-place ``params += delta`` that leaves the ZERO_ID row untouched."""
        keep = self.params[ZERO_ID].copy()
        self.params += delta
        if self.frozen_zero:
            self.params[ZERO_ID] = keep
        if not np.all(np.isfinite(self.params)):
            raise FloatingPointError("factor update produced non-finite values")

    def copy(self) -> "FactorStore":
        return FactorStore(self.params.copy(), self.seed, self.frozen_zero)


def init_factors(cfg: SeeConfig) -> FactorStore:
    """i.i.d. normal factors with std ``(target_var / (r m)) ** (1 / 2o)``.

    With independent factors each coordinate of a simple tensor has variance
    ``std ** (2o)``, so a sum of ``r m`` of them has variance ``target_var``.
    """
    rng = np.random.default_rng(cfg.seed)
    params = rng.normal(0.0, cfg.init_std, size=(cfg.unit_count, cfg.m, cfg.q))
    params[ZERO_ID] = 0.0
    return FactorStore(params, seed=cfg.seed)


def _grid_array(grid, cfg: SeeConfig, store: FactorStore) -> np.ndarray:
    g = grid.grid if isinstance(grid, IndexGrid) else np.asarray(grid)
    if g.shape != (cfg.r, cfg.o):
        raise ValueError(f"grid shape {g.shape} does not match (r, o) = {(cfg.r, cfg.o)}")
    _check_store(store, cfg)
    if g.min() < 0 or g.max() >= store.unit_count:
        raise ValueError("grid holds ids outside the unit vocabulary")
    return g


def _check_store(store: FactorStore, cfg: SeeConfig) -> None:
    if store.params.shape != (cfg.unit_count, cfg.m, cfg.q):
        raise ValueError(
            f"factor block shape {store.params.shape} does not match "
            f"{(cfg.unit_count, cfg.m, cfg.q)}"
        )


def reconstruct_row(grid, store: FactorStore, cfg: SeeConfig) -> np.ndarray:
    g = _grid_array(grid, cfg, store)
    v = store.params
    e = np.zeros(cfg.d)
    for i in range(cfg.m):
        for j in range(cfg.r):
            e += kron_chain([v[u, i] for u in g[j]])[: cfg.d]
    return e


def reconstruct_backward(grid, store: FactorStore, cfg: SeeConfig, upstream) -> dict[tuple[int, int], np.ndarray]:
    """Sparse gradient ``{(unit id, copy): dL/dv}`` given ``dL/de``.

    Units repeated within the grid accumulate; ZERO_ID never gets an entry.
    """
    g = _grid_array(grid, cfg, store)
    up = np.asarray(upstream, dtype=np.float64)
    if up.shape != (cfg.d,):
        raise ValueError(f"upstream must have length {cfg.d}")
    padded = np.zeros(cfg.q**cfg.o)
    padded[: cfg.d] = up
    grads: dict[tuple[int, int], np.ndarray] = {}
    if not np.any(up):
        return grads
    v = store.params
    for i in range(cfg.m):
        for j in range(cfg.r):
            if np.all(g[j] == ZERO_ID):
                continue
            parts = kron_chain_backward([v[u, i] for u in g[j]], padded)
            for u, gk in zip(g[j], parts):
                if u == ZERO_ID:
                    continue
                key = (int(u), i)
                grads[key] = grads[key] + gk if key in grads else gk
    return grads


# -- batched paths ---------------------------------------------------------
# Same accumulation order as reconstruct_row, so results agree bit for bit.


def reconstruct_batch(grids: np.ndarray, params: np.ndarray, d: int) -> np.ndarray:
    """Rows for a ``(B, r, o)`` stack of grids; returns ``(B, d)``."""
    B, r, o = grids.shape
    m = params.shape[1]
    out = np.zeros((B, d))
    for i in range(m):
        for j in range(r):
            acc = params[grids[:, j, 0], i]
            for k in range(1, o):
                f = params[grids[:, j, k], i]
                acc = (acc[:, :, None] * f[:, None, :]).reshape(B, -1)
            out += acc[:, :d]
    return out


def _contract_subscripts(o: int, k: int) -> str:
    axes = string.ascii_letters[:o]
    others = ",".join("z" + axes[a] for a in range(o) if a != k)
    lhs = "z" + axes + ("," + others if others else "")
    return f"{lhs}->z{axes[k]}"


def reconstruct_batch_backward(grids: np.ndarray, params: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Dense factor gradient ``(unit_count, m, q)`` for ``(B, d)`` upstream rows."""
    B, r, o = grids.shape
    U, m, q = params.shape
    d = upstream.shape[1]
    padded = np.zeros((B, q**o))
    padded[:, :d] = upstream
    up = padded.reshape((B,) + (q,) * o)
    grad = np.zeros_like(params)
    specs = [_contract_subscripts(o, k) for k in range(o)]
    for i in range(m):
        for j in range(r):
            fs = [params[grids[:, j, k], i] for k in range(o)]
            for k in range(o):
                gk = np.einsum(specs[k], up, *(fs[a] for a in range(o) if a != k))
                np.add.at(grad[:, i], grids[:, j, k], gk)
    grad[ZERO_ID] = 0.0
    return grad


@dataclass(frozen=True)
class MaterializedTable:
    tokens: tuple[str, ...]
    matrix: np.ndarray  # (|V|, d)

    def __post_init__(self):
        object.__setattr__(self, "word_ids", {w: i for i, w in enumerate(self.tokens)})
        self.matrix.setflags(write=False)

    @property
    def scalars(self) -> int:
        return int(self.matrix.size)

    def lookup(self, word: str) -> np.ndarray:
        return self.matrix[self.word_ids[word]]


def materialize(table: GridTable, store: FactorStore, cfg: SeeConfig) -> MaterializedTable:
    """Expand every word once into a dense ``|V| x d`` lookup table."""
    if (table.r, table.o) != (cfg.r, cfg.o):
        raise ValueError("grid table (r, o) does not match the config")
    _check_store(store, cfg)
    return MaterializedTable(table.tokens, reconstruct_batch(table.grids, store.params, cfg.d))


# -- parameter accounting --------------------------------------------------


def count_params(effective_units: int, q: int, m: int) -> int:
    return effective_units * q * m


def param_count(cfg: SeeConfig) -> int:
    """Trainable factor scalars: every unit except the frozen ZERO_ID row."""
    return count_params(cfg.unit_count - 1, cfg.q, cfg.m)


def solve_m_for_ratio(cfg: SeeConfig, original_params: int, target_ratio: float) -> int:
    """Largest ``m`` whose compression ratio still reaches ``target_ratio``."""
    if not target_ratio > 1:
        raise ValueError("target ratio must exceed 1")
    per_copy = param_count(replace(cfg, m=1))
    # ratio(m) = original / (per_copy * m) >= target  <=>  m <= original / (per_copy * target)
    m = int(original_params // (per_copy * target_ratio))
    while m >= 1 and original_params < target_ratio * per_copy * m:
        m -= 1
    while original_params >= target_ratio * per_copy * (m + 1):
        m += 1
    if m < 1:
        raise ValueError(
            f"ratio {target_ratio} unreachable: m=1 gives at most {original_params / per_copy:.2f}x"
        )
    return m
