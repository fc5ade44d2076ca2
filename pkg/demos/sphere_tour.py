"""From a triangulated sphere to the critical exponential supremum.

Run: python3 demos/sphere_tour.py [subdivisions]
"""
import math
import sys

import tmlab

k = int(sys.argv[1]) if len(sys.argv) > 1 else 3
mesh = tmlab.gen_icosphere(k)
ops = tmlab.build_operators(mesh)
print(f"icosphere({k}): {mesh.vertex_count} vertices, chi = {ops.chi}, "
      f"total curvature {ops.curvature_total:.12f} (4 pi = {4 * math.pi:.12f})")

lam = tmlab.lambda_g(ops).value
print(f"lowest eigenvalue on curvature-orthogonal fields: {lam:.6f} (round sphere: 2)")

print("\nmaximizing sum_i M_i exp(beta u_i^2) over unit-energy, curvature-orthogonal u")
for beta in (2 * math.pi, 3 * math.pi, 3.9 * math.pi):
    sol = tmlab.solve_subcritical(tmlab.TMProblem(ops, beta))
    print(f"  beta = {beta / math.pi:.1f} pi: value {sol.value:9.4f}, max |u| {sol.c_max:.4f}, "
          f"residual/||Au|| {sol.el_residual / sol.el_reference:.1e}")

est = tmlab.estimate_supremum(ops, 0.0, [2.0, 1.0, 0.5, 0.25])
green = tmlab.solve_green(ops, 0)
A = tmlab.fit_Ap(green, mesh).A_p
print(f"\nextrapolated critical value C = {est.C:.3f}")
print(f"blow-up level vol + pi e^(1 + 4 pi A_p) = {tmlab.upper_bound_value(ops.volume, A):.3f} "
      f"with A_p = {A:.5f}")
print("the mesh value sits far above the blow-up level: lumped quadrature lets a field peaked "
      "on one vertex collect exp(beta u^2) at full vertex mass.")
