"""Lowest eigenvalue of the Rayleigh quotient u.Lu / u.Mu under one linear constraint.

Two constraints matter: mean zero (a.u = 0 with a = M 1) gives lambda*,
curvature zero (d.u = 0) gives lambda_g. The solver is block inverse
iteration through the constrained saddle system followed by Rayleigh-Ritz,
so a degenerate lowest eigenvalue (the round sphere's triplet, the flat
torus' quadruplet) converges as fast as a simple one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import ConvergenceError
from .operators import SaddleSolver

CHI_ZERO_TOL = 1e-9


@dataclass(frozen=True)
class EigenResult:
    value: float
    vector: np.ndarray
    constraint_kind: str
    residual: float
    iterations: int
    multiplier: float = 0.0


def _seed_block(n, k, c):
    idx = np.arange(1, n + 1, dtype=float)
    cols = [idx / n]
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    for j in range(1, k):
        cols.append(np.cos(2.0 * math.pi * golden * j * idx + j))
    X = np.column_stack(cols)
    X -= np.outer(c, c @ X) / (c @ c)
    return X


def _residual(L, mass, c, v, lam):
    Lv = L @ v
    r = Lv - lam * mass * v
    nu = float(c @ r) / float(c @ c)
    r = r - nu * c
    return float(np.linalg.norm(r)), float(np.linalg.norm(Lv)), nu


def constrained_min_eigen(ops, c, kind, block=6, max_iterations=10_000,
                          rtol=1e-12, res_tol=1e-8):
    """Minimize u.Lu / u.Mu over {c.u = 0}."""
    L, mass = ops.L, ops.mass
    n = ops.n
    k = max(1, min(block, n - 2))
    solver = SaddleSolver(ops, 0.0, constraint=c)
    X = _seed_block(n, k, c)
    prev = None
    for it in range(1, max_iterations + 1):
        X, _ = solver.solve(mass[:, None] * X)
        A = X.T @ (L @ X)
        B = X.T @ (mass[:, None] * X)
        A = 0.5 * (A + A.T)
        B = 0.5 * (B + B.T)
        theta, C = la.eigh(A, B)
        X = X @ C
        lam = float(theta[0])
        v = X[:, 0]
        res, lv, nu = _residual(L, mass, c, v, lam)
        if prev is not None:
            change = abs(lam - prev) / max(abs(lam), np.finfo(float).tiny)
            if change < rtol and res <= res_tol * max(lv, np.finfo(float).tiny):
                break
        prev = lam
    else:
        raise ConvergenceError(
            f"{kind} eigen-solve did not converge in {max_iterations} iterations "
            f"(residual {res:.3e})")
    v = v - (c @ v) / (c @ c) * c
    v = v / math.sqrt(float(np.dot(mass * v, v)))
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    lam = float(v @ (L @ v))
    res, _, nu = _residual(L, mass, c, v, lam)
    return EigenResult(value=lam, vector=v, constraint_kind=kind, residual=res,
                       iterations=it, multiplier=nu)


def lambda_star(ops, **kw):
    """First eigenvalue under the mean-value-zero condition."""
    return constrained_min_eigen(ops, ops.mass.copy(), "mean_zero", **kw)


def lambda_g(ops, **kw):
    """First eigenvalue under the curvature-moment-zero condition.

    When d.1 vanishes every constant is feasible and has zero energy, so the
    value is 0 with the constant eigenvector; no iteration is run. The result
    is cached on ``ops`` so later alpha checks can be strict.
    """
    if abs(ops.curvature_total) < CHI_ZERO_TOL:
        v = np.full(ops.n, 1.0 / math.sqrt(ops.volume))
        res = float(np.linalg.norm(ops.L @ v))
        out = EigenResult(value=0.0, vector=v, constraint_kind="curvature_zero",
                          residual=res, iterations=0)
    else:
        out = constrained_min_eigen(ops, ops.d, "curvature_zero", **kw)
    ops.cache["lambda_g"] = out.value
    return out


def poincare_check(ops, u, lam):
    """u.Mu <= u.Lu / lambda for u in the curvature-orthogonal space.

    Returns ``(holds, slack)`` with slack = u.Lu / lambda - u.Mu.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    v = getattr(u, "values", u)
    v = ops.check_vector(v)
    e = float(v @ (ops.L @ v))
    m = float(np.dot(ops.mass * v, v))
    slack = e / lam - m
    return slack >= -1e-10 * max(1.0, m), slack
