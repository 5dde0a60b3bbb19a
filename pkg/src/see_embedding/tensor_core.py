"""Dense Kronecker kernels with exact brute-force semantics.

All kernels work on 1-D float64 arrays. The Kronecker layout is row-major
(last factor varies fastest), so ``kron(x, y)[a * len(y) + b] == x[a] * y[b]``.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


def as_vec(x) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def kron(x, y) -> np.ndarray:
    """Kronecker product of two vectors."""
    x, y = as_vec(x), as_vec(y)
    return (x[:, None] * y[None, :]).reshape(-1)


def _check_chain(chain: Sequence) -> list[np.ndarray]:
    if len(chain) == 0:
        raise ValueError("factor chain must hold at least one vector")
    factors = [as_vec(f) for f in chain]
    q = factors[0].size
    if any(f.size != q for f in factors):
        raise ValueError("all factors in a chain must share one length")
    return factors


def kron_chain(chain: Sequence) -> np.ndarray:
    """Left fold of :func:`kron` over ``chain``; length ``q ** o``."""
    factors = _check_chain(chain)
    out = factors[0].copy()
    for f in factors[1:]:
        out = (out[:, None] * f[None, :]).reshape(-1)
    return out


def kron_chain_backward(chain: Sequence, upstream) -> list[np.ndarray]:
    """Gradient of ``<upstream, kron_chain(chain)>`` with respect to each factor.

    The upstream vector is viewed as an ``o``-way ``q x ... x q`` array and
    contracted against every factor except the one being differentiated.
    """
    factors = _check_chain(chain)
    o, q = len(factors), factors[0].size
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape != (q**o,):
        raise ValueError(f"upstream must have length {q**o}, got {g.shape}")
    g = g.reshape((q,) * o)
    grads = []
    for k in range(o):
        t = g
        # contract trailing axes first so the remaining axis indices stay valid
        for ax in range(o - 1, -1, -1):
            if ax == k:
                continue
            t = np.tensordot(t, factors[ax], axes=([ax], [0]))
        grads.append(np.asarray(t, dtype=np.float64).reshape(q))
    return grads


def finite_diff_check(
    f: Callable[[np.ndarray], float],
    x,
    analytic_grad,
    eps: float = 1e-6,
) -> float:
    """Max relative error between central differences of ``f`` and ``analytic_grad``.

    Per entry the error is ``|g_fd - g_an| / max(1e-12, |g_fd| + |g_an|)``.
    """
    if not 0.0 < eps <= 1e-3:
        raise ValueError("eps must lie in (0, 1e-3]")
    x = np.array(x, dtype=np.float64)
    g_an = np.asarray(analytic_grad, dtype=np.float64).reshape(x.shape)
    g_fd = np.empty_like(x)
    flat, fd = x.reshape(-1), g_fd.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        hi = float(f(x))
        flat[i] = old - eps
        lo = float(f(x))
        flat[i] = old
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise FloatingPointError(f"non-finite function value at entry {i}")
        fd[i] = (hi - lo) / (2 * eps)
    denom = np.maximum(1e-12, np.abs(g_fd) + np.abs(g_an))
    return float(np.max(np.abs(g_fd - g_an) / denom))
