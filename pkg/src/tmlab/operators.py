"""Cotangent stiffness, lumped mass, angle defects, and the curvature-orthogonal space.

Sign convention: ``L`` is positive semidefinite, ``u @ L @ u`` approximates
the Dirichlet energy of the piecewise-linear interpolant of ``u``. Every
equation written with the Laplace-Beltrami operator elsewhere in tmlab uses
this ``L`` in place of the (positive) Laplacian.
"""
from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .errors import (
    AlphaTooLarge,
    ConstraintViolation,
    DegenerateTriangleError,
    DimensionError,
    NegativeRadicand,
    SingularSystemError,
    TildeUndefined,
)
from .mesh import triangle_areas

TWO_PI = 2.0 * math.pi
MOMENT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Operators:
    """Discrete (Sigma, g): stiffness, mass diagonal, angle defects.

    ``d[i]`` is the angle defect at vertex ``i``, the discrete curvature
    moment of the hat function at ``i``; ``K = d / mass`` is only for display.
    """

    L: sparse.csr_matrix
    mass: np.ndarray
    d: np.ndarray
    K: np.ndarray
    chi: int
    mesh: object = None
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self):
        return self.mass.shape[0]

    @property
    def M(self):
        return sparse.diags(self.mass, format="csr")

    @property
    def volume(self):
        return float(self.mass.sum())

    @property
    def curvature_total(self):
        """d.1, equal to 2 pi chi up to rounding."""
        return float(self.d.sum())

    def check_vector(self, u, name="u"):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n,):
            raise DimensionError(f"{name} has shape {u.shape}, expected ({self.n},)")
        return u

    def export(self, directory, stem="operators"):
        """Stiffness as MatrixMarket, mass diagonal and defects as text vectors."""
        from .export import write_matrix_market, write_vector

        write_matrix_market(os.path.join(directory, f"{stem}_L.mtx"), self.L,
                            comment="cotangent stiffness (PSD)")
        write_vector(os.path.join(directory, f"{stem}_mass.txt"), self.mass)
        write_vector(os.path.join(directory, f"{stem}_defect.txt"), self.d)


def corner_angles_and_cotangents(lf):
    """Angles and cotangents at the three corners of each face.

    ``lf[:, k]`` is the length opposite corner k. The angle uses
    atan2(4A, b^2 + c^2 - a^2), which stays accurate near 0 and pi.
    """
    areas = triangle_areas(lf)
    l2 = lf * lf
    num = np.empty_like(lf)
    for k in range(3):
        num[:, k] = l2[:, (k + 1) % 3] + l2[:, (k + 2) % 3] - l2[:, k]
    four_a = 4.0 * areas
    angles = np.arctan2(four_a[:, None], num)
    with np.errstate(divide="ignore", invalid="ignore"):
        cot = num / four_a[:, None]
    return angles, cot, areas


def build_operators(mesh):
    """Assemble L, M, d for a validated :class:`~tmlab.mesh.TriangleMesh`."""
    F = mesh.faces
    n = mesh.vertex_count
    lf = mesh.face_lengths()
    angles, cot, areas = corner_angles_and_cotangents(lf)
    if not np.all(np.isfinite(cot)):
        f = int(np.flatnonzero(~np.all(np.isfinite(cot), axis=1))[0])
        raise DegenerateTriangleError(f"non-finite cotangent on face {f}", face=f)

    # corner k's half-cotangent weights the opposite edge (F[k+1], F[k+2])
    i = np.concatenate([F[:, 1], F[:, 2], F[:, 0]])
    j = np.concatenate([F[:, 2], F[:, 0], F[:, 1]])
    w = 0.5 * np.concatenate([cot[:, 0], cot[:, 1], cot[:, 2]])
    off = sparse.coo_matrix((-w, (i, j)), shape=(n, n))
    off = (off + off.T).tocsr()
    off.sum_duplicates()
    diag = -np.asarray(off.sum(axis=1)).ravel()
    L = (off + sparse.diags(diag)).tocsr()
    L.sort_indices()

    mass = np.bincount(F.ravel(), weights=np.repeat(areas / 3.0, 3), minlength=n)
    angle_sum = np.bincount(F.ravel(), weights=angles.ravel(), minlength=n)
    d = TWO_PI - angle_sum
    # Defects below the rounding floor of the angle sum are exact zeros
    # (flat vertices); the floor is a few ulps per incident corner.
    valence = np.bincount(F.ravel(), minlength=n)
    floor = 8.0 * valence * np.finfo(float).eps * TWO_PI
    d[np.abs(d) <= floor] = 0.0
    K = d / mass
    return Operators(L=L, mass=mass, d=d, K=K, chi=int(mesh.euler_characteristic), mesh=mesh)


def dirichlet_energy(ops, u):
    u = ops.check_vector(u)
    return float(u @ (ops.L @ u))


def curvature_moment(ops, u):
    u = ops.check_vector(u)
    return float(ops.d @ u)


def mass_inner(ops, u, v=None):
    u = ops.check_vector(u)
    v = u if v is None else ops.check_vector(v, "v")
    return float(np.dot(ops.mass * u, v))


def _alpha_guard(ops, alpha):
    lam = ops.cache.get("lambda_g")
    if lam is not None:
        if alpha >= lam:
            raise AlphaTooLarge(f"alpha={alpha} >= lambda_g={lam}")
    elif alpha >= 0:
        warnings.warn(
            "lambda_g has not been computed for these operators; "
            f"alpha={alpha} is not checked", RuntimeWarning, stacklevel=3)


def in_Kg(ops, u, tol=MOMENT_TOL):
    m = float(ops.d @ u)
    return abs(m) <= tol * np.linalg.norm(ops.d) * np.linalg.norm(u) or m == 0.0


def norm_1alpha(ops, u, alpha, check=True):
    """sqrt(u.Lu - alpha u.Mu) for u in the discrete curvature-orthogonal space."""
    u = ops.check_vector(u)
    if check:
        _alpha_guard(ops, alpha)
        if not in_Kg(ops, u):
            raise ConstraintViolation(
                f"curvature moment {ops.d @ u:.3e} is not zero; project first")
    e = float(u @ (ops.L @ u))
    m = float(np.dot(ops.mass * u, u))
    rad = e - alpha * m
    if rad < 0:
        if rad < -1e-12 * (abs(e) + abs(alpha * m)):
            raise NegativeRadicand(
                f"u.Lu - alpha u.Mu = {rad:.3e} < 0 (alpha >= lambda_g or u infeasible)")
        rad = 0.0
    return math.sqrt(rad)


@dataclass(frozen=True)
class ConstrainedField:
    """A per-vertex field with certified zero curvature moment."""

    values: np.ndarray
    alpha: float
    norm_1alpha: float
    moment: float

    def scaled(self, s):
        return ConstrainedField(self.values * s, self.alpha, abs(s) * self.norm_1alpha,
                                self.moment * s)


def tilde(ops, u):
    """Curvature-weighted mean (d.u) / (d.1)."""
    if ops.chi == 0:
        raise TildeUndefined("curvature-weighted mean needs chi != 0")
    return float(ops.d @ u) / ops.curvature_total


def project_Kg(ops, u, alpha=0.0, check_alpha=True):
    """u - tilde(u) * 1, wrapped with its moment and alpha-norm."""
    u = ops.check_vector(u)
    if ops.chi == 0:
        raise TildeUndefined("chi = 0: every constant already has zero curvature moment")
    v = u - tilde(ops, u)
    # one correction pass removes the residual rounding in d.(u - t1)
    v = v - float(ops.d @ v) / ops.curvature_total
    return make_field(ops, v, alpha, check_alpha=check_alpha)


def make_field(ops, v, alpha=0.0, check_alpha=True):
    v = ops.check_vector(v)
    if check_alpha:
        _alpha_guard(ops, alpha)
    return ConstrainedField(values=v, alpha=float(alpha),
                            norm_1alpha=norm_1alpha(ops, v, alpha, check=False),
                            moment=float(ops.d @ v))


class SaddleSolver:
    """Factorized system [[L - alpha M, c], [c^T, 0]] for one linear constraint.

    ``solve(rhs)`` returns ``(x, nu)`` with (L - alpha M) x + nu c = rhs and
    c.x = 0. Nonsingular exactly when L - alpha M is definite on c-perp.
    """

    def __init__(self, ops, alpha=0.0, constraint=None):
        c = ops.d if constraint is None else np.asarray(constraint, dtype=float)
        n = ops.n
        A = ops.L - alpha * ops.M if alpha else ops.L
        col = sparse.csr_matrix(c.reshape(-1, 1))
        K = sparse.bmat([[A, col], [col.T, None]], format="csc")
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", sparse.SparseEfficiencyWarning)
                self._lu = spla.splu(K)
        except RuntimeError as exc:
            raise SingularSystemError(f"saddle system is singular: {exc}") from exc
        self.n = n
        self.c = c
        self.alpha = alpha
        self._K = K

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.ndim == 1:
            full = np.concatenate([rhs, [0.0]])
        else:
            full = np.vstack([rhs, np.zeros((1, rhs.shape[1]))])
        sol = self._lu.solve(full)
        if not np.all(np.isfinite(sol)):
            raise SingularSystemError("saddle solve produced non-finite values")
        return sol[: self.n], sol[self.n]

    def residual(self, x, nu, rhs):
        full = np.concatenate([x, [nu]])
        r = self._K @ full - np.concatenate([rhs, [0.0]])
        return float(np.linalg.norm(r))
