"""Print the exact LSSA ratios used to compare lattice surgery with transversal gates."""

from tcnot.analysis import LssaSpec, lssa

print("kind            d  b  n   ratio")
for d in (3, 5, 7, 9):
    for kind in ("xx_merge", "ls_cnot", "tcnot_ordered"):
        r = lssa(LssaSpec(kind, d, 1)).ratio
        print(f"{kind:<15} {d}  1  1   {r} = {float(r):.4f}")
for n in (1, 2, 3, 4, 8):
    for kind in ("ls_cnot_multi", "tcnot_multi"):
        r = lssa(LssaSpec(kind, 5, 1, n)).ratio
        print(f"{kind:<15} 5  1  {n}   {r} = {float(r):.4f}")
