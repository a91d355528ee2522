"""
Pitchfork on the 5-vertex path
==============================

With an odd gain the path's mirror symmetry lets the equilibria be tracked in
two coordinates. Past the first critical gain two disagreeing branches split
off the origin; they only become attracting later, when the transverse
direction stabilises.
"""

from nlconsensus.scenarios import line5_bifurcation

diag = line5_bifurcation(k_min=0.5, k_max=3.5, k_step=0.05)
print("branch appears at K =", round(diag.detected_k_bif, 6))
print("branch stabilises at K =", round(diag.detected_k_stab, 6))

# %%
# A few slices through the diagram. ids: 0 origin, 1/2 agreement at +-c,
# 3/4 disagreeing branches.
for k in (1.0, 2.0, 3.0):
    print(f"K = {k}")
    for p in diag.branches_at(k):
        print(f"   id {p.branch_id}  x1={p.x1:+.4f}  full={p.stab_full:9s}"
              f" reduced={p.stab_manifold}")
