import functools
import os

import numpy as np
import pytest

from tmlab.mesh import gen_flat_torus, gen_icosphere, load_off
from tmlab.operators import build_operators

DATA = os.path.join(os.path.dirname(__file__), "data")
GENUS2 = os.path.join(DATA, "genus2.off")


@functools.lru_cache(maxsize=None)
def icosphere(k, radius=1.0):
    m = gen_icosphere(k, radius)
    return m, build_operators(m)


@functools.lru_cache(maxsize=None)
def torus(n, m=None, a=1.0, b=1.0):
    mesh = gen_flat_torus(n, n if m is None else m, a, b)
    return mesh, build_operators(mesh)


@functools.lru_cache(maxsize=None)
def genus2():
    m = load_off(GENUS2)
    return m, build_operators(m)


def fresh_ops(mesh):
    """Operators with an empty cache (no lambda_g stored)."""
    return build_operators(mesh)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def dense_stiffness(mesh):
    """Cotangent stiffness assembled face by face with dense loops."""
    n = mesh.vertex_count
    L = np.zeros((n, n))
    lf = mesh.face_lengths()
    for f, (i, j, k) in enumerate(mesh.faces):
        a, b, c = lf[f]  # opposite i, j, k
        area = 0.25 * np.sqrt(max((a + b + c) * (-a + b + c) * (a - b + c) * (a + b - c), 0.0))
        cots = [(b * b + c * c - a * a) / (4 * area),
                (c * c + a * a - b * b) / (4 * area),
                (a * a + b * b - c * c) / (4 * area)]
        verts = (i, j, k)
        for corner in range(3):
            p, q = verts[(corner + 1) % 3], verts[(corner + 2) % 3]
            w = 0.5 * cots[corner]
            L[p, q] -= w
            L[q, p] -= w
            L[p, p] += w
            L[q, q] += w
    return L


@functools.lru_cache(maxsize=None)
def sphere_green(k, pole=0):
    """(mesh, ops, fitted Green data, geodesic radii) for icosphere(k)."""
    from tmlab.green import attach_fit, fit_Ap, solve_green
    from tmlab.mesh import geodesic_distances
    from tmlab.spectrum import lambda_g

    mesh, ops = icosphere(k)
    if "lambda_g" not in ops.cache:
        lambda_g(ops)
    r = geodesic_distances(mesh, pole)
    g = solve_green(ops, pole)
    return mesh, ops, attach_fit(g, fit_Ap(g, mesh, r=r)), r


@functools.lru_cache(maxsize=None)
def sphere_supremum(k, grid=(2.0, 1.0, 0.5, 0.25)):
    """Extrapolated critical supremum on icosphere(k) at alpha = 0."""
    from tmlab.solver import estimate_supremum

    _, ops = icosphere(k)
    return estimate_supremum(ops, 0.0, list(grid))


def dense_el_residual(ops, u, beta):
    """Euler-Lagrange residual norm at alpha = 0 from dense matrices, and ||Lu||."""
    Ld, Md = ops.L.toarray(), np.diag(ops.mass)
    e = np.exp(beta * u * u)
    lam = u @ Md @ (u * e)
    mu = ((np.ones(ops.n) @ Md @ (u * e)) / lam) / ops.d.sum()
    r = Ld @ u - Md @ (u * e) / lam + mu * ops.d
    return float(np.linalg.norm(r)), float(np.linalg.norm(Ld @ u))
