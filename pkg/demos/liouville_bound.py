"""Lower bound for the modified Liouville energy under a volume constraint.

Run: python3 demos/liouville_bound.py
"""
import numpy as np

import tmlab

mesh = tmlab.gen_icosphere(4)
ops = tmlab.build_operators(mesh)
C = tmlab.estimate_supremum(ops, 0.0, [2.0, 1.0, 0.5, 0.25]).C
mu = 0.5
print(f"C estimate {C:.3f}; bound 16 pi ln(mu vol / C) = "
      f"{tmlab.theorem4_bound(mu, ops.volume, C):.3f} at mu = {mu}")

rng = np.random.default_rng(0)
fields = [tmlab.shift_to_volume(ops, u, mu) for u in tmlab.random_smooth_factors(mesh, 200, rng)]
checks, _ = tmlab.theorem4_batch(ops, fields, C, mu)
slack = np.array([c.slack for c in checks])
print(f"200 random smooth factors: {np.sum(slack < 0)} violations, slack from "
      f"{slack.min():.2f} to {slack.max():.2f}")

for amp, width in ((10.0, 0.1), (40.0, 0.02)):
    u = tmlab.shift_to_volume(ops, tmlab.concentrated_factor(ops, mesh, 0, amp, width), mu)
    c = tmlab.verify_theorem4(ops, u, C, mu)
    print(f"peak of height {amp} and width {width}: energy {c.L_bar:.2f}, slack {c.slack:.2f}")
