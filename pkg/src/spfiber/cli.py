"""Command-line front end: one subcommand per operation, files written to ``--out``.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 domain or
precondition error. Every emitted file carries the exponent regime tag, and a
single seeded generator feeds all randomness of one invocation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from . import formulas as fm
from .errors import ConfigurationError, SpfiberError
from .families import TrialFamily
from .fiber import FiberCoefficients, classify_fiber, fiber_eval
from .inequalities import check_inequalities
from .minimize import appendix_estimates, minimize_on_sphere, sweep_I, sweep_J
from .radial import DEFAULT_N_POINTS, DEFAULT_R_MAX, RadialFunction, RadialGrid, metadata_lines
from .rayleigh import DEFAULT_BUDGET, catto_sequence, thresholds

class UsageError(Exception):
    """Invalid command-line configuration; carries the offending field name."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"--{field}: {message}")
        self.field = field


def _jsonable(value: Any) -> Any:
    """Convert numpy scalars and arrays; spell non-finite floats as strings."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def _metadata(args: argparse.Namespace) -> dict:
    meta = {"command": args.command, "regime": fm.regime_tag(args.p) if getattr(args, "p", None) else "n/a"}
    if getattr(args, "seed", None) is not None:
        meta["seed"] = args.seed
    meta["version"] = __version__
    return meta


def _write_json(path: Path, payload: dict, meta: dict) -> None:
    text = json.dumps(_jsonable({"metadata": meta, **payload}), indent=2)
    path.write_text(text + "\n", encoding="utf-8")


def _write_csv(path: Path, header: str, rows: Sequence[Sequence], meta: dict) -> None:
    def cell(x: Any) -> str:
        return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(metadata_lines(meta))
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(cell(x) for x in row) + "\n")


# ---------------------------------------------------------------- validation


def _check_range(args: argparse.Namespace) -> None:
    p = getattr(args, "p", None)
    if p is not None and not (math.isfinite(p) and 2.0 < p < 6.0):
        raise UsageError("p", f"must lie in (2, 6), got {p}")
    for name in ("q", "lam", "r", "r1", "r2", "A", "B", "C", "r_max"):
        value = getattr(args, name, None)
        if value is not None and not (math.isfinite(value) and value > 0.0):
            raise UsageError("lambda" if name == "lam" else name.replace("_", "-"), f"must be positive, got {value}")
    for name in ("budget", "samples", "n", "n_max", "max_iter", "points"):
        value = getattr(args, name, None)
        if value is not None and value < 1:
            raise UsageError(name.replace("_", "-"), f"must be a positive integer, got {value}")
    if getattr(args, "stochastic", False) and args.seed is None:
        raise UsageError("seed", f"'{args.command}' draws random samples and needs an explicit seed")


def _family(args: argparse.Namespace) -> TrialFamily:
    family_arg = args.family
    try:
        if family_arg.startswith("@"):
            return _family_from_file(Path(family_arg[1:]))
        return TrialFamily.parse(family_arg)
    except (ConfigurationError, OSError, ValueError) as exc:
        raise UsageError("family", str(exc)) from exc


def _family_from_file(path: Path) -> TrialFamily:
    """``key=value`` lines: kind, n_terms, log_coeff_bounds=lo,hi, log_width_bounds=lo,hi."""
    fields: dict[str, Any] = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "kind":
            fields[key] = value
        elif key == "n_terms":
            fields[key] = int(value)
        elif key in ("log_coeff_bounds", "log_width_bounds"):
            lo, hi = (float(x) for x in value.split(","))
            fields[key] = (lo, hi)
        else:
            raise ValueError(f"{path}: unknown key {key!r}")
    return TrialFamily(**fields)


def _r_values(args: argparse.Namespace) -> list[float]:
    if args.r_values:
        try:
            values = [float(x) for x in args.r_values.split(",") if x.strip()]
        except ValueError as exc:
            raise UsageError("r-values", "expected a comma-separated list of numbers") from exc
    elif args.r_range:
        try:
            start, stop, count = args.r_range.split(":")
            values = list(np.linspace(float(start), float(stop), int(count)))
        except ValueError as exc:
            raise UsageError("r-range", "expected start:stop:count") from exc
    else:
        raise UsageError("r-values", "give --r-values or --r-range")
    if not values or any(not (math.isfinite(v) and v > 0) for v in values):
        raise UsageError("r-values", "masses must be positive")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise UsageError("r-values", "masses must be strictly ascending")
    return [float(v) for v in values]


# ---------------------------------------------------------------- commands


def cmd_solve(args: argparse.Namespace, out: Path) -> str:
    meta = _metadata(args)
    init = RadialFunction.from_csv(args.init) if args.init else None
    grid = None
    if init is None and (args.r_max or args.n):
        grid = RadialGrid(args.r_max or DEFAULT_R_MAX, args.n or DEFAULT_N_POINTS)
    report = minimize_on_sphere(
        args.p, args.q, args.lam, args.r, init=init, step=args.step, max_iter=args.max_iter, grid=grid, tol=args.tol
    )
    profile_path = out / "profile.csv"
    report.u.to_csv(profile_path, meta)
    payload = report.to_dict()
    payload["energy_trace"] = report.energy_trace
    payload["profile_csv"] = str(profile_path)
    _write_json(out / "solve.json", payload, meta)
    return f"solve: E={report.energy!r} converged={report.converged} iterations={report.iterations}"


def _coefficients(args: argparse.Namespace) -> FiberCoefficients:
    return FiberCoefficients(args.A, args.B, args.C, args.r, args.q, args.lam, args.p)


def cmd_classify(args: argparse.Namespace, out: Path) -> str:
    cls = classify_fiber(_coefficients(args))
    _write_json(out / "classification.json", cls.to_dict(), _metadata(args))
    return json.dumps(_jsonable(cls.to_dict()))


def cmd_fiber_scan(args: argparse.Namespace, out: Path) -> str:
    fc = _coefficients(args)
    if not 0.0 < args.t_min < args.t_max:
        raise UsageError("t-min", "need 0 < t-min < t-max")
    t = np.geomspace(args.t_min, args.t_max, args.points)
    values = fiber_eval(fc, t)
    meta = _metadata(args)
    _write_csv(out / "fiber_scan.csv", "t,phi,dphi,ddphi", zip(t, values.value, values.first_deriv, values.second_deriv), meta)
    cls = classify_fiber(fc)
    _write_json(out / "classification.json", cls.to_dict(), meta)
    return f"fiber-scan: {args.points} points, case {cls.case_tag}"


def cmd_thresholds(args: argparse.Namespace, out: Path) -> str:
    rng = np.random.default_rng(args.seed)
    estimates = thresholds(args.q, args.lam, args.p, _family(args), args.budget, rng)
    payload = {"p": args.p, "q": args.q, "lambda": args.lam, "estimates": [e.to_dict() for e in estimates]}
    _write_json(out / "thresholds.json", payload, _metadata(args))
    return "thresholds: " + ", ".join(f"{e.name}={e.value!r}" for e in estimates)


def cmd_sweep(args: argparse.Namespace, out: Path) -> str:
    rng = np.random.default_rng(args.seed)
    radii = _r_values(args)
    family = _family(args)
    if args.kind == "I":
        result = sweep_I(args.p, args.q, args.lam, radii, family, args.budget, rng)
    else:
        result = sweep_J(args.p, args.q, args.lam, radii, family, args.budget, rng)
    meta = _metadata(args)
    meta["kind"] = args.kind
    _write_csv(out / "sweep.csv", result.CSV_HEADER, [row.csv_fields() for row in result.rows], meta)
    _write_json(out / "sweep.json", result.to_dict(), meta)
    verdicts = ", ".join(f"{name}={check.get('holds')}" for name, check in result.checks.items())
    return f"sweep {args.kind}: {len(result.rows)} rows; {verdicts}"


def cmd_check_inequalities(args: argparse.Namespace, out: Path) -> str:
    rng = np.random.default_rng(args.seed)
    reports = check_inequalities(args.p, args.q, args.lam, _family(args), args.samples, rng, args.budget)
    if not reports:
        raise UsageError("p", "no inequality is stated at this exponent")
    _write_json(out / "inequalities.json", {"reports": [r.to_dict() for r in reports]}, _metadata(args))
    return "check-inequalities: " + ", ".join(f"{r.name} holds={r.holds} constant={r.empirical_constant!r}" for r in reports)


def cmd_catto(args: argparse.Namespace, out: Path) -> str:
    report = catto_sequence(args.p, args.r, args.n_max)
    _write_csv(out / "catto.csv", "n,lp,grad,hartree", report.rows(), _metadata(args))
    return f"catto: lp spread {report.lp_spread():.3e}, grad/n^(2/3) spread {report.grad_growth_spread():.3e}"


def cmd_appendix(args: argparse.Namespace, out: Path) -> str:
    rng = np.random.default_rng(args.seed)
    report = appendix_estimates(args.p, args.q, args.lam, args.r1, args.r2, _family(args), args.budget, rng)
    _write_json(out / "appendix.json", report.to_dict(), _metadata(args))
    return f"appendix ({report.part}): I_r1={report.I_r1!r} I_r2={report.I_r2!r} holds={report.holds}"


# ---------------------------------------------------------------- parser


def _add_physics(parser: argparse.ArgumentParser, p_required: bool = True) -> None:
    parser.add_argument("--p", type=float, required=p_required, help="exponent in (2, 6)")
    parser.add_argument("--q", type=float, default=1.0, help="Hartree coupling (default 1)")
    parser.add_argument("--lambda", dest="lam", type=float, default=1.0, help="power coupling (default 1)")


def _add_common(parser: argparse.ArgumentParser, stochastic: bool) -> None:
    parser.add_argument("--seed", type=int, default=None, help="seed of the single random generator")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory (default .)")
    parser.set_defaults(stochastic=stochastic)


def _add_search(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--family", default="gaussian-mixture:3", help="kind[:n_terms] or @file with key=value lines")
    parser.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="objective evaluations per search")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spfiber", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="ground state on the mass sphere")
    _add_physics(solve)
    solve.add_argument("--r", type=float, required=True, help="mass")
    solve.add_argument("--init", type=Path, help="initial profile CSV (r,u with grid header)")
    solve.add_argument("--r-max", type=float, help="box radius")
    solve.add_argument("--n", type=int, help="grid nodes")
    solve.add_argument("--max-iter", type=int, default=20000)
    solve.add_argument("--tol", type=float, default=1e-8)
    solve.add_argument("--step", type=float, default=1.0)
    _add_common(solve, stochastic=False)
    solve.set_defaults(handler=cmd_solve)

    for name, handler, help_text in (
        ("classify", cmd_classify, "classify the fiber map of given integrals"),
        ("fiber-scan", cmd_fiber_scan, "tabulate the fiber map and its derivatives"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        _add_physics(cmd)
        for coeff in ("A", "B", "C"):
            cmd.add_argument(f"--{coeff}", type=float, required=True, help=f"unit-mass integral {coeff}")
        cmd.add_argument("--r", type=float, default=1.0, help="mass (default 1)")
        if name == "fiber-scan":
            cmd.add_argument("--t-min", type=float, default=1e-3)
            cmd.add_argument("--t-max", type=float, default=1e3)
            cmd.add_argument("--points", type=int, default=241)
        _add_common(cmd, stochastic=False)
        cmd.set_defaults(handler=handler)

    thr = sub.add_parser("thresholds", help="family estimates of every threshold at p")
    _add_physics(thr)
    _add_search(thr)
    _add_common(thr, stochastic=True)
    thr.set_defaults(handler=cmd_thresholds)

    sweep = sub.add_parser("sweep", help="I_r or J_r over a mass grid with derived checks")
    _add_physics(sweep)
    sweep.add_argument("--kind", choices=("I", "J"), default="I")
    sweep.add_argument("--r-values", help="comma-separated ascending masses")
    sweep.add_argument("--r-range", help="start:stop:count")
    _add_search(sweep)
    _add_common(sweep, stochastic=True)
    sweep.set_defaults(handler=cmd_sweep)

    ineq = sub.add_parser("check-inequalities", help="random-sample every inequality stated at p")
    _add_physics(ineq)
    ineq.add_argument("--samples", type=int, default=1000)
    _add_search(ineq)
    _add_common(ineq, stochastic=True)
    ineq.set_defaults(handler=cmd_check_inequalities)

    catto = sub.add_parser("catto", help="integrals along the spreading multi-bump sequence")
    _add_physics(catto)
    catto.add_argument("--r", type=float, default=1.0)
    catto.add_argument("--n-max", type=int, default=8)
    _add_common(catto, stochastic=False)
    catto.set_defaults(handler=cmd_catto)

    app = sub.add_parser("appendix", help="comparison estimates between I_r1 and I_r2")
    _add_physics(app)
    app.add_argument("--r1", type=float, required=True)
    app.add_argument("--r2", type=float, required=True)
    _add_search(app)
    _add_common(app, stochastic=True)
    app.set_defaults(handler=cmd_appendix)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _check_range(args)
        args.out.mkdir(parents=True, exist_ok=True)
        summary = args.handler(args, args.out)
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2
    except SpfiberError as exc:
        diagnostics = {"metadata": _metadata(args), **exc.to_dict()}
        text = json.dumps(_jsonable(diagnostics), indent=2)
        try:
            (args.out / "diagnostics.json").write_text(text + "\n", encoding="utf-8")
        except OSError:
            pass
        print(text, file=sys.stderr)
        return exc.exit_code
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
