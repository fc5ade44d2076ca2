"""Conformal metrics e^u g on the discrete surface, their Liouville energies,
and the lower bound of the modified energy in terms of the critical
Trudinger-Moser supremum.

The discrete conformal volume is sum_i M_ii e^{u_i}; the transformed scalar
curvature is e^{-u} (M^{-1} L u + 2K), whose weighted sum against e^u M is
2 pi chi to rounding because the stiffness annihilates constants.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ChiError, PreconditionError

SIXTEEN_PI = 16.0 * math.pi


def curvature_transform(ops, u):
    u = ops.check_vector(u)
    return np.exp(-u) * ((ops.L @ u) / ops.mass + 2.0 * ops.K)


def conformal_volume(ops, u):
    u = ops.check_vector(u)
    return float(np.dot(ops.mass, np.exp(u)))


@dataclass(frozen=True)
class ConformalMetric:
    base_ops: object
    u: np.ndarray
    volume: float
    transformed_curvature: np.ndarray
    gauss_bonnet: float
    gauss_bonnet_error: float


def conformal_metric(ops, u):
    """Volume, curvature and the conformal Gauss-Bonnet sum of e^u g."""
    u = ops.check_vector(u)
    R = curvature_transform(ops, u)
    gb = 0.5 * float(np.dot(R * np.exp(u), ops.mass))
    target = 2.0 * math.pi * ops.chi
    err = abs(gb - target) / max(abs(target), 1.0)
    return ConformalMetric(base_ops=ops, u=u, volume=conformal_volume(ops, u),
                           transformed_curvature=R, gauss_bonnet=gb, gauss_bonnet_error=err)


def liouville_energy(ops, u):
    """u.Lu + 4 d.u."""
    u = ops.check_vector(u)
    return float(u @ (ops.L @ u)) + 4.0 * float(ops.d @ u)


def modified_liouville_energy(ops, u):
    """u.Lu + (8/chi) d.u; equal to the Liouville energy when chi = 2."""
    if ops.chi == 0:
        raise ChiError("the modified Liouville energy divides by chi")
    u = ops.check_vector(u)
    return float(u @ (ops.L @ u)) + 8.0 / ops.chi * float(ops.d @ u)


def theorem4_bound(mu, vol, C_g):
    """16 pi ln(mu vol / C_g)."""
    for name, x in (("mu", mu), ("vol", vol), ("C_g", C_g)):
        if not x > 0:
            raise ValueError(f"{name} must be positive, got {x}")
    return SIXTEEN_PI * math.log(mu * vol / C_g)


@dataclass(frozen=True)
class Theorem4Check:
    holds: bool
    slack: float
    tolerance: float
    L_bar: float
    bound: float
    volume: float
    mu_effective: float


def verify_theorem4(ops, u, C_g_estimate, mu, budget=0.0):
    """Slack of the modified Liouville energy over 16 pi ln(mu vol / C).

    ``budget`` is the uncertainty of ``C_g_estimate`` expressed in the
    bound's units; the check passes when slack >= -(1e-6 + budget). The
    input is rejected, not judged, when the conformal volume is below
    mu times the base volume.
    """
    u = ops.check_vector(u)
    if ops.chi == 0:
        raise ChiError("the bound needs chi != 0")
    vol = ops.volume
    vt = conformal_volume(ops, u)
    if not vt >= mu * vol:
        raise PreconditionError(
            f"conformal volume {vt:.6g} is below mu * vol = {mu * vol:.6g}")
    L_bar = modified_liouville_energy(ops, u)
    bound = theorem4_bound(mu, vol, C_g_estimate)
    slack = L_bar - bound
    tol = 1e-6 + float(budget)
    return Theorem4Check(holds=bool(slack >= -tol), slack=slack, tolerance=tol, L_bar=L_bar,
                         bound=bound, volume=vt, mu_effective=vt / vol)


def estimate_budget(C_estimate, C_reference):
    """16 pi |ln(C_reference / C_estimate)|: how far a bound moves between two estimates."""
    return SIXTEEN_PI * abs(math.log(C_reference / C_estimate))


def weak_form_lhs(ops, u, alpha=0.0):
    """u.Lu - alpha sum M (u - ubar)^2 - 16 pi ln sum M e^u + 16 pi ubar.

    The weak inequality bounds this from below by a constant that is
    not constructive; only the left side is evaluated.
    """
    u = ops.check_vector(u)
    ubar = float(ops.mass @ u) / ops.volume
    dev = u - ubar
    shift = float(np.max(u))
    log_vol = shift + math.log(float(np.dot(ops.mass, np.exp(u - shift))))
    return (float(u @ (ops.L @ u)) - alpha * float(np.dot(ops.mass * dev, dev))
            - SIXTEEN_PI * log_vol + SIXTEEN_PI * ubar)


BATCH_HEADER = ("sample_id", "volume", "mu_effective", "L_bar", "bound", "slack")


def theorem4_batch(ops, fields, C_g_estimate, mu, budget=0.0):
    """One :class:`Theorem4Check` per field plus the CSV rows for them."""
    checks, rows = [], []
    for k, u in enumerate(fields):
        c = verify_theorem4(ops, u, C_g_estimate, mu, budget)
        checks.append(c)
        rows.append((k, c.volume, c.mu_effective, c.L_bar, c.bound, c.slack))
    return checks, rows


def random_smooth_factors(mesh, count, rng, degree=3, amplitude=1.0):
    """Random polynomials of the embedding coordinates, sup-normalized to ``amplitude``.

    Each factor draws a uniform amplitude in (0, amplitude] and Gaussian
    coefficients for every monomial x^a y^b z^c with a + b + c <= degree.
    """
    if mesh.positions is None:
        raise PreconditionError("smooth factors are built from the embedding; mesh has none")
    P = mesh.positions
    P = (P - P.mean(axis=0)) / max(float(np.max(np.abs(P - P.mean(axis=0)))), 1e-300)
    powers = [(a, b, c) for a in range(degree + 1) for b in range(degree + 1 - a)
              for c in range(degree + 1 - a - b) if a + b + c > 0]
    basis = np.column_stack([P[:, 0] ** a * P[:, 1] ** b * P[:, 2] ** c for a, b, c in powers])
    out = []
    for _ in range(count):
        u = basis @ rng.standard_normal(len(powers))
        u = u / max(float(np.max(np.abs(u))), 1e-300)
        out.append(u * amplitude * (1.0 - rng.random()))
    return out


def shift_to_volume(ops, u, mu, margin=1e-12):
    """u + c with conformal volume mu vol (1 + margin)."""
    u = ops.check_vector(u)
    target = mu * ops.volume * (1.0 + margin)
    c = math.log(target) - math.log(conformal_volume(ops, u))
    v = u + c
    if conformal_volume(ops, v) < mu * ops.volume:
        v = v + 4.0 * margin
    return v


def concentrated_factor(ops, mesh, pole, amplitude, width):
    """amplitude * exp(-(r / width)^2) around ``pole``, r geodesic."""
    from .mesh import geodesic_distances

    r = geodesic_distances(mesh, pole)
    return amplitude * np.exp(-(r / width) ** 2)
