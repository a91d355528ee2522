"""
Factions in the karate club
===========================

Clipped-linear consensus on Zachary's karate club. Just above the critical
gain random starts still synchronize; at a larger gain some starts freeze into
two camps that largely follow the club's split.
"""

import numpy as np

from nlconsensus import graphs
from nlconsensus.scenarios import karate_clustering
from nlconsensus.spectral import normalized_spectrum

lam = normalized_spectrum(graphs.builtin("karate")).lambda_second
print(f"lambda_2 = {lam:.6f}, critical gain = {1 / lam:.4f}")

runs = {}
for k in (1.2, 1.8):
    run = runs[k] = karate_clustering(seed=0, k=k)
    print(f"K={k}: {run.kind}, sign matches {run.sign_matches}/34,"
          f" faction spreads {np.round(run.cluster_spreads, 3)}, gap {run.mean_gap:.3f}")

# %%
# Per-faction robustness. Near the critical gain each faction is internally
# cohesive (alpha_in > 0) and its disagreement stays under the bound; at
# K = 1.8 the factions are no longer cohesive on their own.
for run in runs.values():
    for a, t in zip(run.analyses, run.traces):
        print(f"K={a.k}, faction of {len(a.decomposition.vertex_set)}: alpha_in={a.alpha_in:+.4f}"
              f" bound holds={t.holds_at_all_samples} sup|p~|={a.empirical_sup:.3f}")
