"""Explicit test functions: Moser caps on meshes, the entire bubble, and radial
unit-disc profiles for the Carleson-Chang experiment.

Radial profiles are stored against log-radius. A geometric grid in r is a
uniform grid in log r, and keeping log r (rather than r) lets concentration
scales far below the smallest double, e.g. eps = exp(-1000), be sampled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ResolutionError, TildeUndefined
from .mesh import geodesic_distances

PI_E = math.pi * math.e
FOUR_PI = 4.0 * math.pi


# -- bubble -----------------------------------------------------------------

def bubble_profile(r):
    """-(1/4pi) log(1 + pi r^2), the unit-mass solution of -Delta phi = e^{8 pi phi}."""
    r = np.asarray(r, dtype=float)
    out = -np.log1p(math.pi * r * r) / FOUR_PI
    return float(out) if out.ndim == 0 else out


def bubble_mass(r_max=1e4, n=10_000, r_min=1e-8):
    """2 pi int_0^inf e^{8 pi phi} r dr on a geometric grid.

    Composite trapezoid in log r over [r_min, r_max] (the integrand times r
    is smooth and decays at both ends), pi r_min^2 for the core disc, and
    the closed-form tail 1 / (1 + pi r_max^2). Returns ``(integral, tail)``.
    """
    s = np.linspace(math.log(r_min), math.log(r_max), n)
    r = np.exp(s)
    f = 2.0 * math.pi * r * r * np.exp(8.0 * math.pi * bubble_profile(r))
    body = float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(s)))
    core = math.pi * r_min * r_min
    tail = 1.0 / (1.0 + math.pi * r_max * r_max)
    return core + body + tail, tail


# -- radial profiles on the unit disc ------------------------------------

def _log_expm1(x):
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, -np.inf)
    big = x > 30.0
    mid = (x > 0) & ~big
    out[big] = x[big] + np.log1p(-np.exp(-x[big]))
    out[mid] = np.log(np.expm1(x[mid]))
    return out


@dataclass(frozen=True)
class RadialProfile:
    """Radial function on the unit disc.

    ``log_r`` is increasing, starts at -inf (the origin) and ends at 0
    (r = 1); ``values`` are samples of v at those radii, interpolated
    linearly in r on the innermost disc and linearly in log r elsewhere.
    """

    log_r: np.ndarray
    values: np.ndarray
    boundary_zero: bool = True

    def __post_init__(self):
        lr, v = np.asarray(self.log_r, float), np.asarray(self.values, float)
        if lr.shape != v.shape or lr.size < 3:
            raise ValueError("grid and values must be equal-length arrays of size >= 3")
        if not (lr[0] == -np.inf and np.all(np.diff(lr[1:]) > 0) and lr[-1] <= 0):
            raise ValueError("log-radius grid must start at -inf and increase to <= 0")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        if self.boundary_zero and v[-1] != 0.0:
            raise ValueError("boundary_zero profile must vanish at the last grid point")
        object.__setattr__(self, "log_r", lr)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_radii(cls, grid, values, boundary_zero=True):
        grid = np.asarray(grid, float)
        if grid[0] != 0.0 or np.any(np.diff(grid) <= 0) or grid[-1] > 1.0:
            raise ValueError("radii must increase from 0 to at most 1")
        with np.errstate(divide="ignore"):
            lr = np.log(grid)
        return cls(lr, np.asarray(values, float), boundary_zero)

    @property
    def grid(self):
        return np.exp(self.log_r)

    def energy(self):
        """2 pi int v'(r)^2 r dr = 2 pi int (dv/ds)^2 ds with s = log r.

        Exact for the interpolant that is linear in r on [0, r1] and linear
        in log r beyond (the Moser tail is linear in log r).
        """
        v, lr = self.values, self.log_r
        dv = np.diff(v)
        return float(math.pi * dv[0] ** 2 + 2.0 * math.pi * np.sum(dv[1:] ** 2 / np.diff(lr[1:])))

    def normalized(self):
        e = self.energy()
        if not e > 0:
            raise ValueError("profile has zero energy")
        return RadialProfile(self.log_r, self.values / math.sqrt(e), self.boundary_zero)

    def disc_integral(self, exponent=FOUR_PI):
        """2 pi int_0^1 (e^{exponent v^2} - 1) r dr.

        Trapezoid in log r on the grid, pi r1^2 (e^{exponent v1^2} - 1) for
        the innermost disc; terms are summed in the log domain.
        """
        v, lr = self.values, self.log_r
        lg = _log_expm1(exponent * v * v)
        log_pi = math.log(math.pi)
        core = log_pi + 2.0 * lr[1] + lg[1]
        # F_k = 2 pi r_k^2 g_k; trapezoid weight ds/2 at each end of each cell
        logF = math.log(2.0 * math.pi) + 2.0 * lr[1:] + lg[1:]
        ds = np.diff(lr[1:])
        w = np.zeros(logF.size)
        w[:-1] += 0.5 * ds
        w[1:] += 0.5 * ds
        terms = np.concatenate([[core], logF + np.log(w)])
        terms = terms[np.isfinite(terms)]
        if terms.size == 0:
            return 0.0
        return float(np.exp(logsumexp(terms)))


def log_radius_grid(depth, n=10_000, max_step=0.002):
    """-inf followed by a uniform grid in log r from -depth to 0."""
    n = max(int(n), int(math.ceil(depth / max_step)) + 1)
    return np.concatenate([[-np.inf], np.linspace(-depth, 0.0, n)])


def moser_profile(log_inv_eps, n=10_000):
    """Classical Moser cap on the unit disc with core radius eps = e^{-log_inv_eps}.

    sqrt(log(1/eps) / 2pi) on r <= eps, log(1/r) / sqrt(2 pi log(1/eps)) beyond.
    """
    t = float(log_inv_eps)
    lr = log_radius_grid(t + 4.0, n)
    s = -lr  # log(1/r), +inf at the origin
    v = np.where(s >= t, math.sqrt(t / (2 * math.pi)),
                 s / math.sqrt(2 * math.pi * t))
    v[-1] = 0.0
    return RadialProfile(lr, v, True)


def truncated_bubble_profile(log_inv_eps, n=10_000):
    """Bubble of scale eps shifted to vanish on the unit circle.

    phi(r / eps) - phi(1 / eps) with phi the entire bubble: the bubble core
    for r ~ eps and the logarithmic Moser tail (1/2pi) log(1/r) for r >> eps.
    """
    t = float(log_inv_eps)
    lr = log_radius_grid(t + 20.0, n)
    x = math.log(math.pi) + 2.0 * (lr + t)  # log(pi r^2 / eps^2)
    x[0] = -np.inf
    num = np.logaddexp(0.0, math.log(math.pi) + 2.0 * t)
    v = (num - np.logaddexp(0.0, x)) / FOUR_PI
    v[-1] = 0.0
    return RadialProfile(lr, v, True)


@dataclass(frozen=True)
class DiscSample:
    eps_log_inv: float
    energy: float
    disc_integral: float

    @property
    def eps(self):
        return math.exp(-self.eps_log_inv)


def carleson_chang_experiment(family, log_inv_eps_list):
    """Unit-energy disc integrals int_B (e^{4 pi v^2} - 1) dx along a family.

    ``family(t)`` returns the profile at eps = e^{-t}; each profile is
    renormalized to unit Dirichlet energy before integration. The
    reference value for concentrating families is pi e.
    """
    out = []
    for t in log_inv_eps_list:
        prof = family(float(t))
        if not prof.boundary_zero:
            raise ValueError("profiles must vanish on the boundary")
        prof = prof.normalized()
        e = prof.energy()
        if abs(e - 1.0) > 1e-8:
            raise ValueError(f"energy normalization failed: {e}")
        out.append(DiscSample(float(t), e, prof.disc_integral()))
    return out


# -- Moser caps on meshes -----------------------------------------------

@dataclass(frozen=True)
class MoserField:
    values: np.ndarray
    eps: float
    pole: int
    grad_norm: float
    r: np.ndarray

    @property
    def normalized(self):
        """M* = M / ||grad M||_2 (discrete)."""
        return self.values / self.grad_norm


def moser_sequence(mesh, ops, p, eps, r=None, check_resolution=True):
    """Moser cap of the given eps centered at vertex p.

    sqrt(log(1/eps)/2pi) on r <= eps^2, log(eps/r)/sqrt(2 pi log(1/eps)) on
    eps^2 < r < eps, 0 beyond; r is the refined geodesic distance from p.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if r is None:
        r = geodesic_distances(mesh, p)
    if check_resolution:
        h = mesh.mean_edge_length()
        diam = float(np.max(r))
        if not eps * eps > 2.0 * h / diam:
            raise ResolutionError(
                f"core radius eps^2={eps * eps:.3g} is not resolvable "
                f"(need > 2 h / diam = {2 * h / diam:.3g})")
    L = math.log(1.0 / eps)
    top = math.sqrt(L / (2 * math.pi))
    with np.errstate(divide="ignore"):
        mid = np.log(eps / r) / math.sqrt(2 * math.pi * L)
    v = np.where(r <= eps * eps, top, np.where(r < eps, mid, 0.0))
    v = np.clip(v, 0.0, top)
    g = math.sqrt(float(v @ (ops.L @ v)))
    return MoserField(values=v, eps=float(eps), pole=int(p), grad_norm=g, r=r)


def moser_tilde(ops, field):
    """Curvature-weighted mean of the gradient-normalized Moser cap."""
    if ops.chi == 0:
        raise TildeUndefined("chi = 0")
    return float(ops.d @ field.normalized) / ops.curvature_total
