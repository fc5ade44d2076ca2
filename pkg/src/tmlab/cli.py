"""Command line: ``tmlab <command> --config FILE [--set key=value ...] --out DIR``.

Configuration is a flat ``key = value`` file; ``--set`` overrides win. Each
run resolves every parameter (defaults included), computes all outputs in
memory, and only then writes manifest.txt, results.csv, summary.txt and any
vector files, each through a temp-and-rename. The manifest is itself a
valid config, so ``tmlab <command> --config DIR/manifest.txt --out DIR2``
repeats the run.
"""
from __future__ import annotations

import argparse
import io
import math
import os
import sys

import numpy as np

from . import errors as E
from .export import atomic_write_text, fmt, read_record

TWO_PI = 2.0 * math.pi
FOUR_PI = 4.0 * math.pi
PI_E = math.pi * math.e

EXIT_INPUT, EXIT_PRECONDITION, EXIT_NUMERICAL = 2, 3, 4


class ConfigError(E.TMLabError, ValueError):
    """Bad configuration key, value or mesh source."""


# -- parameter parsing -------------------------------------------------------

def _float_list(s):
    return [float(x) for x in str(s).replace(";", ",").split(",") if x.strip()]


def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


COMMON = {"mesh": (str, "icosphere:3"), "rng_seed": (int, 0)}

COMMANDS = {
    "mesh": {"save_off": (_bool, False)},
    "eigen": {},
    "maximize": {"eps": (float, 1.0), "alpha": (float, 0.0)},
    "sweep": {"eps_grid": (_float_list, "2,1,0.5,0.25"), "alpha": (float, 0.0)},
    "sharpness": {"gamma_factors": (_float_list, "1.1,1.0,0.9"), "eps_start": (float, 0.1),
                  "eps_stop": (float, 1e-3), "pole": (int, 0), "alpha": (float, 0.0)},
    "green": {"pole": (int, 0), "alpha": (float, 0.0), "window": (_float_list, "3,10"),
              "model": (str, "quadratic")},
    "phi-eps": {"pole": (int, 0), "alpha": (float, 0.0), "eps_list": (_float_list, ""),
                "eps_multiples": (_float_list, "1,2,4,8")},
    "probe-cc": {"family": (str, "truncated_bubble"),
                 "log_inv_eps": (_float_list, "5,10,50,100,200,400,800,1600")},
    "probe-bubble": {"r_max": (float, 1e4), "n": (int, 10_000), "r_min": (float, 1e-8)},
    "liouville": {"samples": (int, 20), "amplitude": (float, 1.0), "degree": (int, 3)},
    "verify-t4": {"samples": (int, 500), "amplitude": (float, 1.0), "degree": (int, 3),
                  "mu": (float, 0.5), "eps_grid": (_float_list, "2,1,0.5,0.25"),
                  "C_estimate": (float, 0.0)},
}


def _canonical(v):
    if isinstance(v, list):
        return ",".join(fmt(x) for x in v)
    return fmt(v)


def resolve_config(command, raw):
    """Typed parameters for ``command`` from a string map, defaults filled in."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    raw = dict(raw)
    given = raw.pop("command", None)
    if given is not None and given != command:
        raise ConfigError(f"config is for command {given!r}, not {command!r}")
    spec = {**COMMON, **COMMANDS[command]}
    unknown = sorted(set(raw) - set(spec))
    if unknown:
        raise ConfigError(f"unknown keys for {command}: {', '.join(unknown)}")
    out = {}
    for key, (conv, default) in spec.items():
        val = raw.get(key, default)
        try:
            out[key] = conv(val) if isinstance(val, str) else val
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {val!r} ({exc})") from None
    if out["mesh"].startswith("off:"):
        out["mesh"] = "off:" + os.path.abspath(out["mesh"][4:])
    return out


def parse_mesh_spec(spec):
    """``icosphere:k[:r]``, ``torus:n:m[:a:b]`` or ``off:path``."""
    from .mesh import gen_flat_torus, gen_icosphere, load_off

    kind, _, rest = spec.partition(":")
    parts = [p for p in rest.split(":") if p] if rest else []
    try:
        if kind == "icosphere":
            k = int(parts[0]) if parts else 3
            radius = float(parts[1]) if len(parts) > 1 else 1.0
            return gen_icosphere(k, radius)
        if kind == "torus":
            n = int(parts[0])
            m = int(parts[1]) if len(parts) > 1 else n
            a = float(parts[2]) if len(parts) > 2 else 1.0
            b = float(parts[3]) if len(parts) > 3 else a
            return gen_flat_torus(n, m, a, b)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, E.TMLabError):
            raise
        raise ConfigError(f"bad mesh spec {spec!r}") from None
    if kind == "off":
        if not os.path.isfile(rest):
            raise ConfigError(f"OFF file not found: {rest}")
        return load_off(rest)
    raise ConfigError(f"unknown mesh kind in {spec!r}")


# -- outputs -----------------------------------------------------------------

class Outputs:
    """Files held in memory until the run has succeeded."""

    def __init__(self):
        self.files = {}
        self.summary = []

    def text(self, name, s):
        self.files[name] = s

    def vector(self, name, v):
        self.files[name] = "".join(f"{x:.17g}\n" for x in np.asarray(v, float).ravel())

    def csv(self, header, rows, name="results.csv"):
        import csv

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])
        self.files[name] = buf.getvalue()

    def line(self, s):
        self.summary.append(s)

    def flush(self, directory):
        os.makedirs(directory, exist_ok=True)
        self.files["summary.txt"] = "\n".join(self.summary) + "\n"
        for name, s in self.files.items():
            atomic_write_text(os.path.join(directory, name), s)


def h6(x):
    return f"{x:.6g}"


def _setup(cfg):
    from .operators import build_operators
    from .spectrum import lambda_g

    mesh = parse_mesh_spec(cfg["mesh"])
    ops = build_operators(mesh)
    if "alpha" in cfg:
        lambda_g(ops)  # cached, so alpha checks downstream are strict
    return mesh, ops


def _mesh_line(mesh, ops):
    return (f"mesh: V={mesh.vertex_count} E={mesh.edge_count} F={mesh.face_count} "
            f"chi={ops.chi} area={h6(ops.volume)}")


# -- commands ----------------------------------------------------------------

def cmd_mesh(cfg, out):
    from .mesh import off_text

    mesh, ops = _setup(cfg)
    gb = ops.curvature_total
    target = TWO_PI * ops.chi
    rel = abs(gb - target) / abs(target) if target else abs(gb)
    out.csv(("vertices", "edges", "faces", "chi", "genus", "area", "defect_sum",
             "two_pi_chi", "gauss_bonnet_error", "mean_edge_length"),
            [(mesh.vertex_count, mesh.edge_count, mesh.face_count, ops.chi, mesh.genus,
              ops.volume, gb, target, rel, mesh.mean_edge_length())])
    out.vector("mass.txt", ops.mass)
    out.vector("defect.txt", ops.d)
    if cfg["save_off"]:
        if mesh.positions is None:
            raise E.PreconditionError("mesh has no embedding; cannot save OFF")
        out.text("mesh.off", off_text(mesh))
    out.line(_mesh_line(mesh, ops))
    out.line(f"sum of angle defects = {h6(gb)}   reference 2 pi chi = {h6(target)}"
             f"   relative error = {rel:.3g}")


def cmd_eigen(cfg, out):
    from .spectrum import lambda_g, lambda_star

    mesh, ops = _setup(cfg)
    ls, lg = lambda_star(ops), lambda_g(ops)
    out.csv(("kind", "value", "residual", "iterations"),
            [(r.constraint_kind, r.value, r.residual, r.iterations) for r in (ls, lg)])
    out.vector("eigvec_mean_zero.txt", ls.vector)
    out.vector("eigvec_curvature_zero.txt", lg.vector)
    out.line(_mesh_line(mesh, ops))
    out.line(f"lambda* (mean zero)       = {h6(ls.value)}")
    out.line(f"lambda_g (curvature zero) = {h6(lg.value)}")
    side = "chi != 0, so lambda_g > 0" if ops.chi != 0 else "chi = 0, so lambda_g = 0"
    out.line(f"dichotomy: lambda_g > 0 exactly when chi != 0; here {side}")


def cmd_maximize(cfg, out):
    from .solver import TMProblem, solve_subcritical

    mesh, ops = _setup(cfg)
    beta = FOUR_PI - cfg["eps"]
    sol = solve_subcritical(TMProblem(ops, beta, cfg["alpha"], rng_seed=cfg["rng_seed"]))
    rec = sol.record()
    out.csv(tuple(rec), [tuple(rec.values())])
    out.vector("u.txt", sol.u.values)
    out.line(_mesh_line(mesh, ops))
    out.line(f"beta = 4 pi - {h6(cfg['eps'])} = {h6(beta)}   (critical exponent 4 pi = {h6(FOUR_PI)})")
    out.line(f"value = {h6(sol.value)}   vol = {h6(ops.volume)}   converged = {sol.converged}")
    out.line(f"EL residual = {sol.el_residual:.3g} (reference {sol.el_reference:.3g})")


def cmd_sweep(cfg, out):
    from .solver import estimate_supremum

    mesh, ops = _setup(cfg)
    est = estimate_supremum(ops, cfg["alpha"], cfg["eps_grid"], rng_seed=cfg["rng_seed"])
    out.csv(("eps", "beta", "value", "converged", "el_residual", "monotone"),
            [(s.eps, s.beta, s.value, s.converged, s.el_residual, est.monotone)
             for s in est.solutions])
    out.line(_mesh_line(mesh, ops))
    for s in est.solutions:
        out.line(f"eps = {h6(s.eps)}   value = {h6(s.value)}")
    out.line(f"monotone in eps: {est.monotone}")
    out.line(f"extrapolated supremum C = {h6(est.C)}   (vol = {h6(ops.volume)})")


def cmd_sharpness(cfg, out):
    from .solver import divergence_probe

    mesh, ops = _setup(cfg)
    eps = []
    e = cfg["eps_start"]
    while e >= cfg["eps_stop"] * (1 - 1e-12):
        eps.append(e)
        e *= 0.5
    if not eps:
        raise ConfigError("eps_start must be at least eps_stop")
    rows = []
    out.line(_mesh_line(mesh, ops))
    for f in cfg["gamma_factors"]:
        pr = divergence_probe(ops, f * FOUR_PI, eps, pole=cfg["pole"], alpha=cfg["alpha"])
        rows += [(pr.gamma, e, v, d) for e, v, d in zip(pr.eps, pr.values, pr.diverged)]
        out.line(f"gamma = {h6(f)} * 4 pi: first {h6(pr.values[0])}, last {h6(pr.values[-1])}, "
                 f"growth {h6(pr.growth)}, diverged {bool(np.any(pr.diverged))}")
    out.csv(("gamma", "eps", "value", "diverged"), rows)


def cmd_green(cfg, out):
    from .green import attach_fit, fit_Ap, solve_green, upper_bound_value
    from .mesh import geodesic_distances

    mesh, ops = _setup(cfg)
    g = solve_green(ops, cfg["pole"], cfg["alpha"])
    r = geodesic_distances(mesh, cfg["pole"])
    w = cfg["window"]
    if len(w) != 2:
        raise ConfigError("window needs two values")
    fit = fit_Ap(g, mesh, window=tuple(w), model=cfg["model"], r=r)
    g = attach_fit(g, fit)
    bound = upper_bound_value(ops.volume, fit.A_p)
    out.csv(("pole", "alpha", "c_scalar", "residual", "r_min", "r_max", "A_p", "slope",
             "fit_quality", "points", "bound"),
            [(g.pole, g.alpha, g.c_scalar, g.residual, *fit.fit_window, fit.A_p, fit.slope,
              fit.fit_quality, fit.points, bound)])
    out.vector("G.txt", g.G)
    out.vector("r.txt", r)
    out.line(_mesh_line(mesh, ops))
    out.line(f"c = {h6(g.c_scalar)}   residual = {g.residual:.3g}   2 pi chi = {h6(TWO_PI * ops.chi)}")
    out.line(f"A_p = {h6(fit.A_p)}   R^2 = {h6(fit.fit_quality)}   points = {fit.points}")
    out.line(f"vol + pi e^(1 + 4 pi A_p) = {h6(bound)}   (pi e = {h6(PI_E)})")


def cmd_phi_eps(cfg, out):
    from .green import (attach_fit, build_phi_epsilon, fit_Ap, smallest_resolvable_eps,
                        solve_green)
    from .mesh import geodesic_distances

    mesh, ops = _setup(cfg)
    g = solve_green(ops, cfg["pole"], cfg["alpha"])
    r = geodesic_distances(mesh, cfg["pole"])
    g = attach_fit(g, fit_Ap(g, mesh, r=r))
    eps_list = cfg["eps_list"]
    if not eps_list:
        e0 = smallest_resolvable_eps(r, mesh.mean_edge_length())
        limit = 0.1 * float(np.max(r))
        eps_list = [e0 * k for k in cfg["eps_multiples"] if -e0 * k * math.log(e0 * k) < limit]
    reps = [build_phi_epsilon(ops, mesh, g, e, r=r)[1] for e in eps_list]
    keys = tuple(k for k in reps[0].record() if k != "caveat")
    out.csv(keys + ("resolved",), [tuple(rep.record()[k] for k in keys) + (rep.margin > rep.quadrature_spread,)
                                   for rep in reps])
    out.line(_mesh_line(mesh, ops))
    out.line(f"A_p = {h6(g.A_p)}   vol + pi e^(1 + 4 pi A_p) = {h6(reps[0].bound)}")
    for rep in reps:
        out.line(f"eps = {h6(rep.eps)}: rescale {h6(rep.rescale)}, value {h6(rep.value)}, "
                 f"margin {h6(rep.margin)}; {rep.caveat}")


def cmd_probe_cc(cfg, out):
    from .probes import carleson_chang_experiment, moser_profile, truncated_bubble_profile

    families = {"truncated_bubble": truncated_bubble_profile, "moser": moser_profile}
    if cfg["family"] not in families:
        raise ConfigError(f"family must be one of {', '.join(families)}")
    samples = carleson_chang_experiment(families[cfg["family"]], cfg["log_inv_eps"])
    out.csv(("eps", "log_inv_eps", "energy", "disc_integral"),
            [(s.eps, s.eps_log_inv, s.energy, s.disc_integral) for s in samples])
    for s in samples:
        out.line(f"log(1/eps) = {h6(s.eps_log_inv)}: integral {h6(s.disc_integral)} "
                 f"(pi e = {h6(PI_E)}, difference {s.disc_integral - PI_E:+.3g})")


def cmd_probe_bubble(cfg, out):
    from .probes import bubble_mass

    total, tail = bubble_mass(cfg["r_max"], cfg["n"], cfg["r_min"])
    out.csv(("integral", "tail", "error"), [(total, tail, total - 1.0)])
    out.line(f"int e^(8 pi phi) = {total:.12g}   (expected 1, tail {tail:.3g})")


def _factors(cfg, mesh, count):
    from .liouville import random_smooth_factors

    rng = np.random.default_rng(cfg["rng_seed"])
    return random_smooth_factors(mesh, count, rng, degree=cfg["degree"],
                                 amplitude=cfg["amplitude"])


def cmd_liouville(cfg, out):
    from .liouville import conformal_metric, liouville_energy, modified_liouville_energy

    mesh, ops = _setup(cfg)
    rows = []
    for k, u in enumerate(_factors(cfg, mesh, cfg["samples"])):
        cm = conformal_metric(ops, u)
        mod = modified_liouville_energy(ops, u) if ops.chi else math.nan
        rows.append((k, cm.volume, liouville_energy(ops, u), mod, cm.gauss_bonnet,
                     cm.gauss_bonnet_error))
    out.csv(("sample_id", "volume", "liouville", "modified_liouville", "gauss_bonnet",
             "gauss_bonnet_error"), rows)
    out.line(_mesh_line(mesh, ops))
    out.line(f"{len(rows)} conformal factors; conformal Gauss-Bonnet reference 2 pi chi = "
             f"{h6(TWO_PI * ops.chi)}, worst relative error {max(r[5] for r in rows):.3g}")


def cmd_verify_t4(cfg, out):
    from .liouville import shift_to_volume, theorem4_batch
    from .solver import estimate_supremum

    mesh, ops = _setup(cfg)
    if ops.chi == 0:
        raise E.ChiError("the bound needs chi != 0")
    C = cfg["C_estimate"]
    source = "given"
    if not C > 0:
        est = estimate_supremum(ops, 0.0, cfg["eps_grid"], rng_seed=cfg["rng_seed"])
        C = est.C
        source = "extrapolated sweep"
    mu = cfg["mu"]
    fields = [shift_to_volume(ops, u, mu) for u in _factors(cfg, mesh, cfg["samples"])]
    checks, rows = theorem4_batch(ops, fields, C, mu)
    out.csv(("sample_id", "volume", "mu_effective", "L_bar", "bound", "slack"), rows)
    bad = sum(not c.holds for c in checks)
    out.line(_mesh_line(mesh, ops))
    out.line(f"C estimate = {h6(C)} ({source}); bound 16 pi ln(mu vol / C) = {h6(checks[0].bound)}")
    out.line(f"samples = {len(checks)}   violations = {bad}   "
             f"smallest slack = {h6(min(c.slack for c in checks))}")


HANDLERS = {
    "mesh": cmd_mesh, "eigen": cmd_eigen, "maximize": cmd_maximize, "sweep": cmd_sweep,
    "sharpness": cmd_sharpness, "green": cmd_green, "phi-eps": cmd_phi_eps,
    "probe-cc": cmd_probe_cc, "probe-bubble": cmd_probe_bubble, "liouville": cmd_liouville,
    "verify-t4": cmd_verify_t4,
}

INPUT_ERRORS = (ConfigError, E.MeshError, E.ResourceGuardError, E.DimensionError)
PRECONDITION_ERRORS = (E.TildeUndefined, E.ChiError, E.PreconditionError, E.AlphaTooLarge,
                       E.ResolutionError, E.FitError, E.ConstraintViolation,
                       E.NegativeRadicand, E.DegenerateFieldError)
NUMERICAL_ERRORS = (E.ConvergenceError, E.SingularSystemError, E.OverflowGuard,
                    E.MonotonicityError)


def run(command, raw_config, out_dir):
    """Run one experiment; returns the resolved configuration."""
    cfg = resolve_config(command, raw_config)
    out = Outputs()
    out.line(f"tmlab {command}")
    HANDLERS[command](cfg, out)
    manifest = f"command = {command}\n" + "".join(
        f"{k} = {_canonical(v)}\n" for k, v in sorted(cfg.items()))
    out.text("manifest.txt", manifest)
    out.flush(out_dir)
    return cfg


def _parser():
    p = argparse.ArgumentParser(prog="tmlab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="key = value file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one key (repeatable)")
    p.add_argument("--out", required=True, help="output directory")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        raw = read_record(args.config) if args.config else {}
        for item in args.set:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"--set expects key=value, got {item!r}")
            raw[key.strip()] = value.strip()
        run(args.command, raw, args.out)
    except OSError as exc:
        print(f"tmlab: input error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except INPUT_ERRORS as exc:
        print(f"tmlab: input error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PRECONDITION_ERRORS as exc:
        print(f"tmlab: precondition error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except NUMERICAL_ERRORS as exc:
        print(f"tmlab: numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
