"""From factors to embedding rows, and back.

A row is a sum of Kronecker chains, so two words that share a sememe share
the factor vectors behind it. This script checks that on a small grid and
runs the backward pass against finite differences.
"""
import numpy as np

from see_embedding import (SeeConfig, ZERO_ID, finite_diff_check, init_factors,
                           reconstruct_backward, reconstruct_row)

cfg = SeeConfig(d=20, o=3, r=3, m=2, unit_count=12, seed=0)
print(f"d={cfg.d} o={cfg.o} -> q={cfg.q} (q**o = {cfg.q ** cfg.o} coordinates, first {cfg.d} kept)")
store = init_factors(cfg)

word_a = np.array([[2, 3, 0], [4, 5, 6], [7, 4, 0]])
word_b = np.array([[8, 9, 0], [4, 5, 6], [ZERO_ID] * 3])  # shares sense row 1 with word_a
ea, eb = reconstruct_row(word_a, store, cfg), reconstruct_row(word_b, store, cfg)
print("cosine(a, b) =", round(float(ea @ eb / np.linalg.norm(ea) / np.linalg.norm(eb)), 4))

# A row of ZERO ids adds nothing, so a word with fewer senses is just shorter.
blank = word_a.copy()
blank[2] = ZERO_ID
only = np.full_like(word_a, ZERO_ID)
only[2] = word_a[2]
gap = reconstruct_row(word_a, store, cfg) - reconstruct_row(blank, store, cfg)
print("row 2 contributes exactly its own chain:",
      np.allclose(gap, reconstruct_row(only, store, cfg)))

# Gradient of a linear probe with respect to every (unit, copy) it touches.
rng = np.random.default_rng(1)
probe = rng.normal(size=cfg.d)
grads = reconstruct_backward(word_a, store, cfg, probe)
worst = 0.0
for (unit, copy), g in sorted(grads.items()):
    def f(x, unit=unit, copy=copy):
        s = store.copy()
        s.params[unit, copy] = x
        return float(probe @ reconstruct_row(word_a, s, cfg))
    worst = max(worst, finite_diff_check(f, store.params[unit, copy], g, eps=1e-5))
print(f"{len(grads)} factor gradients, worst relative error {worst:.2e}")
