"""
Fixed points of scalar signal functions
=======================================

A consensus state ``c 1`` is an equilibrium exactly when ``s(c) = c``; its
stability along the consensus line comes from the sign of ``s(x) - x`` on
either side.
"""

from nlconsensus.signals import (clip_linear, find_fixed_points, sine_staircase,
                                 staircase_example, tanh_gain, validate_assumptions)

for s in (tanh_gain(0.5), tanh_gain(2.5), clip_linear(2.0), staircase_example()):
    print(s.describe())
    for fp in find_fixed_points(s):
        where = f"[{fp.lo:+.3f}, {fp.hi:+.3f}]" if fp.is_interval else f"{fp.value:+.4f}"
        print(f"   {where:18s} {fp.classification}")

# %%
# The sine staircase touches the diagonal without crossing it, so its
# fixed points are one-sided: stable from one side, repelling from the other.
s = sine_staircase()
for fp in find_fixed_points(s):
    print(f"{fp.value:+.3f}  left_stable={fp.left_stable}  right_stable={fp.right_stable}")
print(validate_assumptions(s).to_dict())
