"""How many parameters does each method spend on a 46,272 x 512 table?

The factor block is (units, m, q), so the rank r never shows up in the
count. Low-rank, tensor-train, word2ket and MorphTE budgets are listed for
comparison.
"""
from fractions import Fraction

from see_embedding import SeeConfig, param_count, solve_m_for_ratio
from see_embedding.baselines import (lrmf_params, lrmf_rank_for_ratio, morphte_params, suggest_factorization,
                                     tt_params, word2ket_best, word2ket_params)

V, d = 46272, 512
original = V * d
print(f"dense table: {original:,} parameters\n")

print(f"{'m':>3} {'params':>10} {'ratio':>7}")
for m in (18, 9, 4, 2):
    n = param_count(SeeConfig(d=d, o=3, r=5, m=m, unit_count=16326))
    print(f"{m:>3} {n:>10,} {float(Fraction(original, n)):>7.2f}")

print("\nrank sweep at m=9:",
      sorted({param_count(SeeConfig(d=d, o=3, r=r, m=9, unit_count=16326)) for r in range(1, 101)}))
print("MorphTE over the same ranks grows:", [morphte_params(16325, r, 8, 9) for r in (1, 2, 3)], "...")

target = 20
m = solve_m_for_ratio(SeeConfig(d=d, o=3, r=5, m=1, unit_count=16326), original, target)
k = lrmf_rank_for_ratio(V, d, target)
print(f"\nfor {target}x: SEE m={m}, low-rank k={k} ({lrmf_params(V, d, k):,} params)")

rows, cols = suggest_factorization(V), suggest_factorization(d)
for rank in (4, 16, 64):
    n = tt_params(list(zip(rows, cols)), [1, rank, rank, 1])
    print(f"tensor train {rows}x{cols} rank {rank}: {n:,} ({original / n:.1f}x)")

for o, r in word2ket_best(V, d, target).items():
    if r is None:
        print(f"word2ket order {o}: no rank reaches {target}x")
    else:
        q = SeeConfig(d=d, o=o, r=1, m=1, unit_count=2).q
        print(f"word2ket order {o}: rank {r} ({word2ket_params(V, r, o, q):,} params)")
