"""Maximize sum_i M_ii exp(beta u_i^2) over the unit alpha-ball of the
curvature-orthogonal space.

The functional is convex and even, so its maximum over the ball sits on
the unit sphere {d.u = 0, u.(L - alpha M)u = 1}. The ascent direction is
built from the Riesz representative of the gradient in the alpha inner
product, one saddle solve per iteration with a factorization reused
across the run.

Euler-Lagrange system in the PSD-stiffness convention::

    (L - alpha M) u = (1/lam) M (u e^{beta u^2}) - mu d
    lam = sum M u^2 e^{beta u^2}
    mu  = ((1/lam) sum M u e^{beta u^2} + alpha sum M u) / (d.1)

Pairing with u reproduces the definition of lam and pairing with the
constant vector fixes mu, so neither multiplier needs a calibration factor.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AlphaTooLarge,
    ChiError,
    MonotonicityError,
    OverflowGuard,
    TildeUndefined,
)
from .operators import SaddleSolver, make_field, norm_1alpha, project_Kg
from .probes import bubble_profile, moser_sequence
from .spectrum import lambda_g

FOUR_PI = 4.0 * math.pi
EXP_GUARD = 700.0


def functional_value(ops, u, beta):
    """sum_i M_ii exp(beta u_i^2), refusing exponents above 700."""
    u = ops.check_vector(getattr(u, "values", u))
    q = beta * u * u
    top = float(np.max(q)) if q.size else 0.0
    if top > EXP_GUARD:
        raise OverflowGuard(f"beta * max u^2 = {top:.6g} exceeds {EXP_GUARD:g}", magnitude=top)
    return float(np.dot(ops.mass, np.exp(q)))


def _el_parts(ops, u, beta, alpha):
    e = np.exp(beta * u * u)
    Mue = ops.mass * u * e
    lam = float(Mue @ u)
    if not lam > 0:
        raise ValueError("lambda multiplier is not positive (u = 0?)")
    mu = (float(Mue.sum()) / lam + alpha * float(ops.mass @ u)) / ops.curvature_total
    Au = ops.L @ u - alpha * (ops.mass * u)
    r = Au - Mue / lam + mu * ops.d
    return float(np.linalg.norm(r)), lam, mu, float(np.linalg.norm(Au))


def el_residual(ops, sol, beta, alpha):
    """Norm of the Euler-Lagrange residual at ``sol`` (a solution, field or vector)."""
    u = getattr(sol, "u", sol)
    u = ops.check_vector(getattr(u, "values", u))
    return _el_parts(ops, u, beta, alpha)[0]


def el_multipliers(ops, u, beta, alpha):
    """``(residual, lam, mu, ||(L - alpha M) u||)``."""
    u = ops.check_vector(getattr(u, "values", u))
    return _el_parts(ops, u, beta, alpha)


@dataclass(frozen=True)
class TMProblem:
    ops: object
    beta: float
    alpha: float = 0.0
    seeds: tuple = ()
    max_iterations: int = 5000
    tolerance: float = 1e-10
    rng_seed: int = 0
    default_seeds: bool = True

    def __post_init__(self):
        if not 0 < self.beta <= FOUR_PI * (1 + 1e-15):
            raise ValueError(f"beta must lie in (0, 4 pi], got {self.beta}")
        if self.ops.chi == 0:
            raise TildeUndefined("the curvature-orthogonal ball needs chi != 0")
        lam = self.ops.cache.get("lambda_g")
        if lam is None:
            lam = lambda_g(self.ops).value
        if not self.alpha < lam:
            raise AlphaTooLarge(f"alpha={self.alpha} >= lambda_g={lam}")


@dataclass(frozen=True)
class TMSolution:
    u: object
    value: float
    lambda_mult: float
    mu_mult: float
    c_max: float
    el_residual: float
    converged: bool
    trace: np.ndarray
    beta: float
    alpha: float
    seed_index: int = 0
    iterations: int = 0
    el_reference: float = field(default=1.0, repr=False)

    @property
    def eps(self):
        return FOUR_PI - self.beta

    def record(self):
        return {
            "eps": self.eps,
            "alpha": self.alpha,
            "value": self.value,
            "lambda_mult": self.lambda_mult,
            "mu_mult": self.mu_mult,
            "c_max": self.c_max,
            "el_residual": self.el_residual,
            "converged": self.converged,
        }

    def export(self, directory, stem="solution"):
        from .export import write_record, write_vector

        write_record(os.path.join(directory, f"{stem}.txt"), self.record())
        write_vector(os.path.join(directory, f"{stem}_u.txt"), self.u.values)


def _max_curvature_vertex(ops):
    return int(np.argmax(ops.d))


def default_seeds(ops, rng_seed=0):
    """Ramp, bubble at the most curved vertex, three fixed-seed random fields."""
    n = ops.n
    seeds = [np.arange(1, n + 1, dtype=float) / n]
    mesh = ops.mesh
    if mesh is not None:
        from .mesh import geodesic_distances

        p = _max_curvature_vertex(ops)
        r = geodesic_distances(mesh, p)
        seeds.append(bubble_profile(r / (2.0 * mesh.mean_edge_length())))
    rng = np.random.default_rng(rng_seed)
    for _ in range(3):
        seeds.append(rng.standard_normal(n))
    return seeds


def _retract(ops, v, alpha):
    v = v - float(ops.d @ v) / ops.curvature_total
    v = v - float(ops.d @ v) / ops.curvature_total
    s = norm_1alpha(ops, v, alpha, check=False)
    if not s > 0:
        return None
    return v / s


def _ascend(ops, solver, u, beta, alpha, max_iterations, tolerance):
    """Projected ascent from a feasible unit field.

    Directions are Riesz gradients combined Polak-Ribiere style (reset to
    the plain gradient whenever the combination is not an ascent
    direction); steps move along the great circle of the alpha-sphere
    through u, so feasibility needs no correction beyond rounding. The
    step is found by halving (at most 40 times) or doubling, then refined
    once by a parabola; a candidate is accepted only if it does not lower
    the functional.
    """
    A = lambda x: ops.L @ x - alpha * (ops.mass * x)  # noqa: E731
    F = functional_value(ops, u, beta)
    trace = [F]
    quiet = 0
    theta = 0.1
    p = g_prev = None
    gg_prev = 1.0
    it = 0
    for it in range(1, max_iterations + 1):
        grad = 2.0 * beta * ops.mass * u * np.exp(beta * u * u)
        w, _ = solver.solve(grad)
        g = w - float(u @ A(w)) * u
        gg = float(g @ A(g))
        if p is None:
            p = g.copy()
        else:
            p = p - float(u @ A(p)) * u
            p = g + max(0.0, float(g @ A(g - g_prev)) / gg_prev) * p
            if float(p @ A(g)) <= 0.0:
                p = g.copy()
        is_gradient = p is not None and np.array_equal(p, g)
        g_prev, gg_prev = g, max(gg, 1e-300)
        pn = math.sqrt(max(float(p @ A(p)), 0.0))
        best = None
        if pn > 0.0 and gg > 0.0:
            ph = p / pn

            def at(t):
                v = _retract(ops, math.cos(t) * u + math.sin(t) * ph, alpha)
                return (v, functional_value(ops, v, beta)) if v is not None else (None, -math.inf)

            t = theta
            cand = at(t)
            halvings = 0
            while cand[1] < F and halvings < 40:
                t *= 0.5
                cand = at(t)
                halvings += 1
            if cand[1] >= F:
                while 2.0 * t < 1.5:
                    nxt = at(2.0 * t)
                    if nxt[1] <= cand[1]:
                        break
                    t, cand = 2.0 * t, nxt
                slope = float(grad @ ph)
                den = 2.0 * (cand[1] - F - slope * t)
                if den < 0.0:
                    ts = -slope * t * t / den
                    if 0.0 < ts < 1.5:
                        alt = at(ts)
                        if alt[1] > cand[1]:
                            t, cand = ts, alt
                best, theta = cand, t
        if best is None:
            if is_gradient:
                # a numerical fixed point: every further iteration repeats
                # this one, so the quiet window is filled directly
                trace.extend([F] * max(0, 50 - quiet))
                break
            p = None
            quiet += 1
            trace.append(F)
            continue
        u, Fn = best
        change = (Fn - F) / F
        F = Fn
        trace.append(F)
        quiet = quiet + 1 if change < tolerance else 0
        if quiet >= 50:
            res, _, _, ref = _el_parts(ops, u, beta, alpha)
            if res < 1e-6 * ref:
                break
    return u, F, np.asarray(trace), it


def solve_subcritical(problem):
    """Best of a multistart projected ascent; see :class:`TMSolution`."""
    ops, beta, alpha = problem.ops, float(problem.beta), float(problem.alpha)
    seeds = list(problem.seeds)
    if problem.default_seeds:
        seeds += default_seeds(ops, problem.rng_seed)
    if not seeds:
        raise ValueError("no seeds")
    solver = SaddleSolver(ops, alpha, constraint=ops.d)
    best = None
    for k, s in enumerate(seeds):
        s = ops.check_vector(getattr(s, "values", s))
        u0 = _retract(ops, s, alpha)
        if u0 is None:
            continue
        u, F, trace, its = _ascend(ops, solver, u0, beta, alpha,
                                   problem.max_iterations, problem.tolerance)
        if best is None or F > best[1]:
            best = (u, F, trace, its, k)
    if best is None:
        raise ValueError("every seed projects to the zero field")
    u, F, trace, its, k = best
    res, lam, mu, ref = _el_parts(ops, u, beta, alpha)
    tail = trace[-51:]
    flat = tail.size == 51 and np.all(np.diff(tail) <= problem.tolerance * tail[:-1])
    return TMSolution(
        u=make_field(ops, u, alpha, check_alpha=False),
        value=F,
        lambda_mult=lam,
        mu_mult=mu,
        c_max=float(np.max(np.abs(u))),
        el_residual=res,
        converged=bool(flat and res < 1e-6 * ref),
        trace=trace,
        beta=beta,
        alpha=alpha,
        seed_index=k,
        iterations=its,
        el_reference=ref,
    )


@dataclass(frozen=True)
class SupremumEstimate:
    eps: np.ndarray
    values: np.ndarray
    solutions: tuple
    C: float
    slope: float
    monotone: bool


def estimate_supremum(ops, alpha, eps_grid, noise=1e-4, **kw):
    """Sweep beta = 4 pi - eps along a decreasing grid and extrapolate to eps = 0.

    Each solve is warm-started from the previous maximizer, so the sweep is
    a chain of ascents. The limit is the intercept of the line through the
    three smallest eps. The value is convex in beta, so a secant extended to
    the right lies below the curve: the intercept underestimates the
    critical supremum of the same mesh.
    """
    eps = np.asarray(eps_grid, dtype=float)
    if eps.ndim != 1 or eps.size < 1:
        raise ValueError("eps grid must be a nonempty 1-d sequence")
    if np.any(np.diff(eps) >= 0):
        raise ValueError("eps grid must be strictly decreasing")
    if np.any(eps <= 0) or np.any(eps >= FOUR_PI):
        raise ValueError("eps values must lie in (0, 4 pi)")
    sols, prev = [], None
    for e in eps:
        seeds = (prev.u.values,) if prev is not None else ()
        sol = solve_subcritical(TMProblem(ops, FOUR_PI - e, alpha, seeds=seeds, **kw))
        sols.append(sol)
        prev = sol
    vals = np.array([s.value for s in sols])
    drops = vals[1:] < vals[:-1] * (1.0 - noise)
    if np.any(drops):
        i = int(np.flatnonzero(drops)[0])
        raise MonotonicityError(
            f"value fell from {vals[i]:.10g} (eps={eps[i]:g}) to {vals[i + 1]:.10g} "
            f"(eps={eps[i + 1]:g}); an ascent is trapped at a local maximum")
    if eps.size >= 2:
        k = min(3, eps.size)
        slope, C = np.polyfit(eps[-k:], vals[-k:], 1)
        slope = -slope
    else:
        C, slope = vals[-1], 0.0
    return SupremumEstimate(eps=eps, values=vals, solutions=tuple(sols), C=float(C),
                            slope=float(slope), monotone=bool(np.all(np.diff(vals) >= 0)))


@dataclass(frozen=True)
class DivergenceProbe:
    gamma: float
    eps: np.ndarray
    values: np.ndarray
    diverged: np.ndarray

    @property
    def growth(self):
        """Last over first value; inf when any value overflowed."""
        if np.any(self.diverged):
            return math.inf
        return float(self.values[-1] / self.values[0])


def divergence_probe(ops, gamma, eps_list, pole=0, alpha=0.0):
    """Functional at exponent gamma along the projected, unit-norm Moser caps.

    The resolution guard of :func:`~tmlab.probes.moser_sequence` is bypassed:
    the point is to push eps below what the mesh resolves. An overflow of
    the exponential is recorded as ``diverged`` with value inf.
    """
    if ops.chi == 0:
        raise TildeUndefined("the Moser probe projects by the curvature mean; chi = 0")
    if ops.mesh is None:
        raise ValueError("operators carry no mesh; geodesic radii are unavailable")
    from .mesh import geodesic_distances

    eps = np.asarray(eps_list, dtype=float)
    r = geodesic_distances(ops.mesh, pole)
    vals, div = [], []
    for e in eps:
        m = moser_sequence(ops.mesh, ops, pole, float(e), r=r, check_resolution=False)
        f = project_Kg(ops, m.normalized, alpha, check_alpha=False)
        if not f.norm_1alpha > 0:
            raise ValueError(f"Moser cap at eps={e:g} is constant on the mesh")
        f = f.scaled(1.0 / f.norm_1alpha)
        try:
            vals.append(functional_value(ops, f.values, gamma))
            div.append(False)
        except OverflowGuard:
            vals.append(math.inf)
            div.append(True)
    return DivergenceProbe(float(gamma), eps, np.array(vals), np.array(div))


def constant_blowup_chi_zero(ops, k_list):
    """Functional at 4 pi on the constants k for chi = 0, equal to vol e^{4 pi k^2}."""
    if ops.chi != 0:
        raise ChiError(f"constants are feasible only for chi = 0 (chi = {ops.chi})")
    ones = np.ones(ops.n)
    return np.array([functional_value(ops, k * ones, FOUR_PI) for k in k_list])
