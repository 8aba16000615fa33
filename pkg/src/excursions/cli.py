"""Command-line front end.

Every command prints a table (CSV by default, JSON on request) preceded by a
metadata block that echoes the full configuration, the tool version and any
error estimates.  Output contains no timestamps, so identical arguments give
identical bytes.

Exit codes: 0 success, 1 numerical-gate failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np
from scipy.integrate import quad

from . import __version__
from . import montecarlo as mc
from . import observables as obs
from .fredholm import (
    DEFAULT_QUAD_ORDER,
    WindowSet,
    be_truncation,
    finite_det,
    fredholm_det_extended,
    fredholm_det_scalar,
    scalar_kernel,
)
from .kernels import BEKernel, BesselTimePartition, TimePartition, path_density
from .painleve import (
    DEFAULT_S0,
    DEFAULT_TOL,
    prob_bottom,
    prob_top,
)

EXIT_OK, EXIT_GATE, EXIT_INPUT = 0, 1, 2


class InputError(ValueError):
    """Invalid command-line input (exit code 2)."""


# ---------------------------------------------------------------------------
# parsing helpers


def parse_floats(text: str | None) -> list[float]:
    if text is None or text == "":
        return []
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise InputError(f"cannot parse number list {text!r}") from exc


def parse_times(text: str | None) -> list[float]:
    times = parse_floats(text)
    if not times:
        raise InputError("--times is required")
    if any(not 0 < t < 1 for t in times) or any(b <= a for a, b in zip(times, times[1:])):
        raise InputError("--times must be strictly increasing inside (0, 1)")
    return times


def parse_range(text: str) -> list[int]:
    """'1..9', '3' or '1,2,5' to a list of positive integers."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            out = list(range(int(lo), int(hi) + 1))
        else:
            out = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise InputError(f"cannot parse integer range {text!r}") from exc
    if not out or any(v < 1 for v in out):
        raise InputError("n values must be positive integers")
    return out


def _one_n(text: str) -> int:
    vals = parse_range(text)
    if len(vals) != 1:
        raise InputError("this command takes a single --n")
    return vals[0]


def _tau(args) -> float:
    if args.tau is None or not 0 < args.tau < 1:
        raise InputError("--tau must lie strictly inside (0, 1)")
    return float(args.tau)


# ---------------------------------------------------------------------------
# output


def _clean(value):
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def render(columns: list[str], rows: list[list], metadata: dict, fmt: str) -> str:
    metadata = _clean(metadata)
    rows = [[_clean(v) for v in r] for r in rows]
    if fmt == "json":
        doc = {"metadata": metadata, "columns": columns,
               "rows": [dict(zip(columns, r)) for r in rows]}
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    buf.write("# " + json.dumps(metadata, sort_keys=False) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _config(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _meta(args, **extra) -> dict:
    return {"tool": "excursions", "version": __version__, "command": args.command,
            "config": _config(args), **extra}


# ---------------------------------------------------------------------------
# commands; each returns (columns, rows, metadata, ok)


def cmd_density(args):
    n, tau = _one_n(args.n), _tau(args)
    sig = obs.sigma(tau)
    x_max = args.x_max if args.x_max is not None else sig * (np.sqrt(4 * n) + 4)
    steps = args.grid_steps or 200
    xs = np.linspace(0.0, x_max, steps + 1)
    rho = path_density(n, tau, xs)
    # normalization: integral of rho equals n (one unit per path)
    total = quad(lambda x: path_density(n, tau, x), 0.0, sig * (np.sqrt(4 * n) + 12),
                 limit=400, epsabs=1e-13)[0]
    err = abs(total / n - 1.0)
    rows = [[x, r] for x, r in zip(xs, rho)]
    ok = err < 1e-8
    return (["x", "density"], rows,
            _meta(args, normalization=total / n, normalization_error=err,
                  normalization_ok=ok, density_integrates_to=n), ok)


def _thresholds(args, tau):
    vals = parse_floats(args.thresholds)
    if not vals:
        raise InputError("--thresholds is required")
    if any(v < 0 for v in vals):
        raise InputError("thresholds must be nonnegative")
    sig = obs.sigma(tau)
    return (np.asarray(vals) * sig, np.asarray(vals)) if args.scaled else \
        (np.asarray(vals), np.asarray(vals) / sig)


def cmd_cdf(args):
    n, tau = _one_n(args.n), _tau(args)
    method = args.method or "finite"
    if method not in obs.METHODS:
        raise InputError(f"--method must be one of {obs.METHODS}")
    x, s = _thresholds(args, tau)
    if args.side == "bottom":
        if method == "series" and np.any(s > 0.3):
            raise InputError("the series method needs s <= 0.3")
        p = np.atleast_1d(obs.bottom_cdf(n, tau, x, method, args.quad_order, args.tol))
        label = "P(X_1 >= x)"
    else:
        if method == "series":
            raise InputError("no series method for the top path")
        p = np.atleast_1d(obs.top_cdf(n, tau, x, method, args.quad_order, args.tol))
        label = "P(X_n < x)"
    rows = [[xi, si, pi, method] for xi, si, pi in zip(x, s, p)]
    extra = {}
    if method == "painleve" and args.side == "top":
        extra["note"] = ("zeros mark points below the downward integration floor, where "
                         "the probability is below the floor value")
    return (["x", "s", "probability", "method"], rows,
            _meta(args, quantity=label, sigma=obs.sigma(tau), **extra), True)


def cmd_joint(args):
    n = _one_n(args.n)
    times = parse_times(args.times)
    thr = parse_floats(args.thresholds)
    if len(thr) != len(times):
        raise InputError("--thresholds needs one value per time")
    if any(v < 0 for v in thr):
        raise InputError("thresholds must be nonnegative")
    kind = args.kind
    val = obs.joint_cdf(n, TimePartition(tuple(times)), thr, kind, args.quad_order)
    note = None if kind in ("bottom", "top") else "raw determinant"
    return (["n", "times", "thresholds", "kind", "probability"],
            [[n, ";".join(map(repr, times)), ";".join(map(repr, thr)), kind, val]],
            _meta(args, note=note), True)


def cmd_areas(args):
    ns = parse_range(args.n or "1..9")
    rows = []
    for n in ns:
        a = obs.expected_areas(n, args.quad_order)
        rows.append([n, a.bottom_mean, a.top_mean, a.scaled_bottom, a.bottom_error,
                     a.top_error])
    return (["n", "E_A_lowest", "E_A_highest", "sqrt_n_E_A_lowest", "error_lowest",
             "error_highest"], rows, _meta(args), True)


def cmd_constants(args):
    c = obs.constant_cL(args.quad_order)
    rows = [["bessel_integral", c.bessel_integral, c.bessel_error],
            ["c_L", c.c_L, c.bessel_error * np.pi / (16 * np.sqrt(2))],
            ["c_H", c.c_H, 0.0],
            ["f2_mean", c.f2_mean, 0.0]]
    for n in parse_range(args.n or "5..9"):
        rows.append([f"top_asymptotic_n{n}", obs.area_asymptotics(n, "top", c), 0.0])
        rows.append([f"bottom_asymptotic_n{n}", obs.area_asymptotics(n, "bottom", c), 0.0])
    return (["name", "value", "error_estimate"], rows,
            _meta(args, f2_mean_source="stored constant", bessel_cutoff=c.cutoff), True)


def cmd_limits(args):
    ns = parse_range(args.n or "8,16,32,64,128")
    offsets = parse_floats(args.times) or [0.0]
    thr = parse_floats(args.thresholds) or [2.0] * len(offsets)
    if len(thr) != len(offsets):
        raise InputError("--thresholds needs one value per time offset")
    try:
        times = BesselTimePartition(tuple(offsets))
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    check = obs.joint_limit_check(times, thr, ns, quad_order=args.quad_order)
    rows = []
    for r in check["rows"]:
        err = obs.bessel_scaling_error(r["n"], 5.0, times if times.m > 1 else None,
                                       points=args.grid_steps or 51)
        rows.append([r["n"], r["value"], check["bessel"], r["difference"], err])
    errs = [r[4] for r in rows]
    kernel_monotone = all(b < a for a, b in zip(errs[:-1], errs[1:]))
    return (["n", "scaled_determinant", "bessel_determinant", "difference",
             "kernel_sup_error"], rows,
            _meta(args, determinant_monotone=check["monotone"],
                  kernel_error_monotone=kernel_monotone,
                  probe=("multi-time tolerance is an engineering target" if check["probe"]
                         else None)),
            True)


def cmd_simulate(args):
    n = _one_n(args.n)
    M = args.grid_steps or mc.DEFAULT_M
    samples = args.samples or 100_000
    obs_kind = args.observable
    common = dict(streams=args.streams, threads=args.threads, sampler=args.sampler)
    meta = {}
    try:
        if obs_kind in ("bottom", "top"):
            tau = _tau(args)
            x = np.asarray(parse_floats(args.thresholds))
            if not len(x):
                raise InputError("--thresholds is required")
            fn = mc.estimate_bottom_cdf if obs_kind == "bottom" else mc.estimate_top_cdf
            res = fn(n, M, tau, x, samples, args.seed, **common)
        elif obs_kind == "joint":
            times = parse_times(args.times)
            x = parse_floats(args.thresholds)
            res = [mc.estimate_joint(n, M, times, x, args.kind, samples, args.seed, **common)]
        elif obs_kind == "areas":
            res = list(mc.estimate_areas(n, M, samples, args.seed, **common))
        else:  # density
            tau = _tau(args)
            out = mc.density_chi_square(n, M, tau, samples, args.seed, **common)
            res = []
            meta = {"chi_square": out["statistic"], "pvalue": out["pvalue"],
                    "dof": out["dof"]}
            rows = [[i, int(c), float(e)] for i, (c, e) in
                    enumerate(zip(out["counts"], out["expected"]))]
            return (["bin", "count", "expected"], rows, _meta(args, **meta),
                    out["pvalue"] >= 0.01)
    except (mc.RejectionFailure,) as exc:
        raise InputError(str(exc)) from exc
    if args.sampler == "rejection" and n > 1:
        rate = mc.acceptance_rate(n, M, 20_000, args.seed)
        meta["acceptance_rate"] = rate.estimate
    if args.dump:
        _dump_samples(args, n, M)
    rows = [[r.label, r.estimate, r.standard_error, r.sample_count, r.seed] for r in res]
    return (["observable", "estimate", "standard_error", "samples", "seed"], rows,
            _meta(args, **meta), True)


def _dump_samples(args, n, M):
    """Write raw sampled positions at the requested times (or full paths) as CSV."""
    rng = mc.make_streams(args.seed, 1)[0]
    count = min(args.samples or 1000, 10_000)
    with open(args.dump, "w", newline="") as fh:
        w = csv.writer(fh)
        if args.observable == "areas":
            paths = mc.sample_matrix_paths(n, M, rng, count)
            w.writerow(["sample", "path"] + [f"t{k}" for k in range(M + 1)])
            for i, p in enumerate(paths):
                for j, row in enumerate(p):
                    w.writerow([i, j] + [repr(float(v)) for v in row])
        else:
            times = parse_floats(args.times) or [args.tau]
            x = mc.sample_matrix_times(n, times, rng, count)
            w.writerow(["sample", "time"] + [f"X{j + 1}" for j in range(n)])
            for i, block in enumerate(x):
                for t, row in zip(times, block):
                    w.writerow([i, t] + [repr(float(v)) for v in row])


def selfcheck_rows(samples: int = 200_000, seed: int = 1, threads: int = 1,
                   quad_order: int = DEFAULT_QUAD_ORDER) -> list[list]:
    """Doubling gates and three-route agreement; rows (check, value, bound, pass)."""
    rows = []
    # quadrature doubling for n <= 8, thresholds up to sqrt(4n) + 2
    worst = 0.0
    for n in (1, 2, 4, 8):
        for s in np.linspace(0.25, np.sqrt(4 * n) + 2, 6):
            for f in (lambda q: fredholm_det_scalar(scalar_kernel(n), (0, s), q),
                      lambda q: fredholm_det_scalar(scalar_kernel(n), (s, np.inf), q,
                                                    truncation_point=be_truncation(n)),
                      lambda q: finite_det(n, (0, s), q)):
                worst = max(worst, abs(f(quad_order) - f(2 * quad_order)))
    ext = BEKernel(2, TimePartition((0.4, 0.6)))
    for q in (quad_order,):
        a = fredholm_det_extended(ext, WindowSet.bottom([0.3, 0.3], quad_order=q))
        b = fredholm_det_extended(ext, WindowSet.bottom([0.3, 0.3], quad_order=2 * q))
        worst = max(worst, abs(a - b))
    rows.append(["quadrature_doubling", worst, 1e-9, worst < 1e-9])
    # ODE initialization
    s_grid = np.arange(0.25, 3.01, 0.25)
    worst = 0.0
    for n in range(1, 6):
        worst = max(worst, float(np.max(np.abs(prob_bottom(n, s_grid)
                                               - prob_bottom(n, s_grid, s0=DEFAULT_S0 / 2)))))
    rows.append(["ode_s0_halving", worst, 1e-8, worst < 1e-8])
    # three routes
    worst = 0.0
    for n in range(1, 6):
        fb = np.array([finite_det(n, (0, s)) for s in s_grid])
        ft = np.array([finite_det(n, (s, np.inf)) for s in s_grid])
        nb = np.array([fredholm_det_scalar(scalar_kernel(n), (0, s)) for s in s_grid])
        nt = np.array([fredholm_det_scalar(scalar_kernel(n), (s, np.inf),
                                           truncation_point=be_truncation(n)) for s in s_grid])
        pb, pt = prob_bottom(n, s_grid), prob_top(n, s_grid)
        for a, b in ((fb, nb), (fb, pb), (nb, pb), (ft, nt), (ft, pt), (nt, pt)):
            worst = max(worst, float(np.max(np.abs(a - b))))
    rows.append(["three_route_agreement", worst, 1e-5, worst < 1e-5])
    # Monte Carlo grid doubling (area functional; grid-time probabilities are exact)
    x = 0.3 * np.sqrt(0.5)
    p1 = mc.estimate_bottom_cdf(2, 512, 0.5, [x], samples, seed, threads=threads)[0]
    p2 = mc.estimate_bottom_cdf(2, 1024, 0.5, [x], samples, seed + 1, threads=threads)[0]
    band = 3 * np.hypot(p1.standard_error, p2.standard_error)
    rows.append(["mc_grid_doubling_probability", abs(p1.estimate - p2.estimate), band,
                 abs(p1.estimate - p2.estimate) < band])
    area_samples = max(samples // 100, 500)
    a1 = mc.estimate_areas(2, 128, area_samples, seed, threads=threads)[0]
    a2 = mc.estimate_areas(2, 256, area_samples, seed + 1, threads=threads)[0]
    band = 3 * np.hypot(a1.standard_error, a2.standard_error)
    rows.append(["mc_grid_doubling_area", abs(a1.estimate - a2.estimate), band,
                 abs(a1.estimate - a2.estimate) < band])
    return rows


def cmd_selfcheck(args):
    rows = selfcheck_rows(args.samples or 200_000, args.seed, args.threads, args.quad_order)
    ok = all(r[3] for r in rows)
    return (["check", "value", "bound", "pass"], rows, _meta(args, all_passed=ok), ok)


# ---------------------------------------------------------------------------


COMMANDS = {
    "density": (cmd_density, "one-point path density rho_n(x, tau)"),
    "cdf": (cmd_cdf, "distribution of the lowest or highest path at one time"),
    "joint": (cmd_joint, "multi-time joint probability via the extended kernel"),
    "areas": (cmd_areas, "expected areas under the lowest and highest paths"),
    "constants": (cmd_constants, "large-n area constants c_L and c_H"),
    "limits": (cmd_limits, "convergence to the Bessel scaling limit"),
    "simulate": (cmd_simulate, "Monte Carlo estimates with standard errors"),
    "selfcheck": (cmd_selfcheck, "doubling gates and three-route agreement"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=str, default=None, help="path count, list or range a..b")
    common.add_argument("--tau", type=float, default=None, help="observation time in (0,1)")
    common.add_argument("--times", type=str, default=None, help="comma-separated times")
    common.add_argument("--thresholds", type=str, default=None,
                        help="comma-separated thresholds (physical units unless --scaled)")
    common.add_argument("--scaled", action="store_true",
                        help="read thresholds as s = x / sigma(tau)")
    common.add_argument("--method", type=str, default=None,
                        help="finite | fredholm | painleve | series")
    common.add_argument("--quad-order", type=int, default=DEFAULT_QUAD_ORDER)
    common.add_argument("--tol", type=float, default=DEFAULT_TOL, help="ODE relative tolerance")
    common.add_argument("--seed", type=int, default=1)
    common.add_argument("--samples", type=int, default=None)
    common.add_argument("--grid-steps", type=int, default=None,
                        help="grid size M (simulate) or number of grid points")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--streams", type=int, default=mc.DEFAULT_STREAMS)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--output", type=str, default=None, help="write here instead of stdout")

    parser = argparse.ArgumentParser(
        prog="excursions",
        description="Nonintersecting Brownian excursions: distributions, areas and limits.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (func, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(func=func)
        if name == "cdf":
            p.add_argument("--side", choices=("bottom", "top"), default="bottom")
        if name in ("joint", "simulate"):
            p.add_argument("--kind", choices=("bottom", "top"), default="bottom")
        if name == "density":
            p.add_argument("--x-max", type=float, default=None)
        if name == "simulate":
            p.add_argument("--observable", default="bottom",
                           choices=("bottom", "top", "joint", "areas", "density"))
            p.add_argument("--sampler", choices=("matrix", "rejection"), default="matrix")
            p.add_argument("--dump", type=str, default=None,
                           help="also write raw samples to this CSV file")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return int(exc.code) if exc.code is not None else EXIT_INPUT
    if args.quad_order < 4:
        print("error: --quad-order must be at least 4", file=sys.stderr)
        return EXIT_INPUT
    if args.threads < 1 or args.streams < 1:
        print("error: --threads and --streams must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        columns, rows, meta, ok = args.func(args)
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = render(columns, rows, meta, args.format)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if not ok:
        print("error: numerical gate failed", file=sys.stderr)
        return EXIT_GATE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
