"""
Where agreement breaks down on a path graph
===========================================

Saturated consensus on a 5-vertex path. The spectrum of ``D^-1 A`` fixes a
critical gain: below ``K lambda = 1`` every start collapses onto a common
value, above it the flow can settle on a state where neighbours disagree.
"""

import numpy as np

from nlconsensus import graphs
from nlconsensus.dynamics import integrate
from nlconsensus.equilibria import classify_equilibrium
from nlconsensus.rng import stream
from nlconsensus.signals import clip_linear, tanh_gain
from nlconsensus.spectral import normalized_spectrum, threshold_report

g = graphs.builtin("line", 5)
spec = normalized_spectrum(g)
print("eigenvalues of D^-1 A:", np.round(spec.eigenvalues, 6))
print("lambda_2 =", spec.lambda_second, " (1/sqrt(2) on this path)")

k_crit = 1.0 / spec.lambda_second
print(f"critical gain 1/lambda_2 = {k_crit:.6f}")

# %%
# Same random start, gains on either side of the critical one.
x0 = stream(0, "demo_path").uniform(-1, 1, g.n)
for k in (0.8 * k_crit, 1.8 * k_crit):
    rep = threshold_report(spec, k)
    traj = integrate(g, tanh_gain(k), x0)
    eq = classify_equilibrium(g, tanh_gain(k), traj.final_state)
    print(f"K={k:.3f} K*lambda={rep.k_lambda:.3f} -> {eq.kind:5s}",
          np.round(traj.final_state, 4))

# %%
# A random start may still synchronize above the threshold. Starting along the
# top eigenvector shows the disagreeing equilibrium that appears there.
v = spec.top_eigenvector / np.max(np.abs(spec.top_eigenvector))
k = 1.8 * k_crit
xf = integrate(g, tanh_gain(k), 0.5 * v).final_state
print(f"K={k:.3f} from 0.5*v -> {classify_equilibrium(g, tanh_gain(k), xf).kind}",
      np.round(xf, 4))

# %%
# Exactly at the threshold the clipped gain has a whole line of equilibria
# along the top eigenvector: any small multiple of it is left alone.
s = clip_linear(k_crit)
for a in (0.05, 0.2):
    x = a / k_crit * v
    drift = np.max(np.abs(integrate(g, s, x, t_end=20).final_state - x))
    print(f"start {a:.2f} * v: drift after t=20 is {drift:.1e}")
