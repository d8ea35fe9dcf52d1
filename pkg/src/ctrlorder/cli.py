"""Command-line interface: order analysis, bracket tables, simulation, verification.

Exit codes are a stable contract:

    0  success
    1  input error (bad file, bad flags, malformed vectors)
    2  validation error (the system document loaded but is unusable)
    3  order not found up to the requested level
    4  integration aborted on divergence
    5  verification failure (an identity the implementation must satisfy broke)

Machine-readable output (--json) is a single JSON document embedding the run
manifest, so any report can be reproduced from the report alone.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys as _sys
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

from . import __version__
from .expr import ExprError, ZeroTestPolicy, to_text
from .fields import ad_pow, lie_bracket
from .order import (
    local_order_at,
    problem_order,
    verify_bracket_identities,
    verify_single_input_parity,
)
from .simulate import (
    BangBang,
    FixedControl,
    PiecewiseControl,
    SimConfig,
    check_lemma1,
    detect_singular_intervals,
    integrate_extremal,
)
from .system import ControlSystem, SystemLoadError, extend_with_cost, load, validate, without_cost

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_VALIDATION = 2
EXIT_TRUNCATED = 3
EXIT_DIVERGED = 4
EXIT_VERIFY = 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclasses.dataclass(frozen=True)
class RunManifest:
    command: str
    input: str
    options: dict
    version: str
    timestamp: str

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _manifest(command: str, path: str, options: dict) -> RunManifest:
    return RunManifest(
        command=command,
        input=path,
        options=options,
        version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(),
    )


def _policy_from_args(args) -> ZeroTestPolicy:
    try:
        return ZeroTestPolicy(
            sample_count=args.zero_samples,
            box_halfwidth=args.zero_box,
            tolerance=args.zero_tol,
            seed=args.seed,
        )
    except ValueError as err:
        raise CliError(f"bad zero-test options: {err}", EXIT_INPUT) from err


def _load_system(path: str) -> ControlSystem:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise CliError(f"cannot read '{path}': {err}", EXIT_INPUT) from err
    try:
        document = json.loads(text)
    except json.JSONDecodeError as err:
        raise CliError(f"'{path}' is not valid JSON: {err}", EXIT_INPUT) from err
    try:
        return load(document)
    except (SystemLoadError, ValueError) as err:
        raise CliError(f"'{path}': {err}", EXIT_INPUT) from err


def _validate_or_die(sys_model: ControlSystem, horizon: float) -> None:
    report = validate(sys_model, horizon)
    if not report.ok:
        lines = [f"  [{f.severity}] {f.location}: {f.message}" for f in report.findings]
        raise CliError("validation failed:\n" + "\n".join(lines), EXIT_VALIDATION)


def _prepare(sys_model: ControlSystem, extend: bool, notes: list[str]) -> ControlSystem:
    """Resolve a pending running cost: extend on request, else analyze raw dynamics."""
    if extend:
        if sys_model.cost is None:
            raise CliError("--extend-cost given but the system has no cost", EXIT_INPUT)
        return extend_with_cost(sys_model)
    if sys_model.cost is not None:
        notes.append("cost present: analyzing raw dynamics (use --extend-cost to absorb it)")
        return without_cost(sys_model)
    return sys_model


def _parse_vector(text: str, expected: int, flag: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(","))
    except ValueError as err:
        raise CliError(f"{flag} must be comma-separated reals: {err}", EXIT_INPUT) from err
    if len(values) != expected:
        raise CliError(f"{flag} must have {expected} entries, got {len(values)}", EXIT_INPUT)
    return values


def _q_text(q: Fraction) -> str:
    return str(q)


def _emit(args, human_lines: list[str], payload: dict) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for line in human_lines:
            print(line)


# ---------------------------------------------------------------------------
# order
# ---------------------------------------------------------------------------


def cmd_order(args) -> int:
    sys_model = _load_system(args.file)
    _validate_or_die(sys_model, args.horizon)
    notes: list[str] = []
    sys_model = _prepare(sys_model, args.extend_cost, notes)
    policy = _policy_from_args(args)
    report = problem_order(sys_model, args.k_max, policy)

    lines = list(notes)
    lines.append(
        f"system: {sys_model.label or args.file} (n={sys_model.n} states, m={sys_model.m} inputs)"
    )
    evidence_payload = []
    for level in report.evidence:
        nonzero = [e for e in level.entries if not e.zero]
        if not nonzero:
            lines.append(
                f"level {level.level}: all {len(level.entries)} bracket fields vanish"
            )
        else:
            first = nonzero[0]
            point = ", ".join(f"{k}={v:.6g}" for k, v in (first.witness_point or {}).items())
            lines.append(
                f"level {level.level}: {len(nonzero)}/{len(level.entries)} bracket fields"
                f" nonzero; first [g{first.j + 1}, ad_f^{level.level - 1} g{first.i + 1}]"
                f" (component {first.witness_component + 1} at {point or 'constant'})"
            )
        evidence_payload.append(
            {
                "level": level.level,
                "entries": [
                    {
                        "i": e.i + 1,
                        "j": e.j + 1,
                        "zero": e.zero,
                        "witness_component": None
                        if e.witness_component is None
                        else e.witness_component + 1,
                        "witness_point": dict(e.witness_point) if e.witness_point else None,
                    }
                    for e in level.entries
                ],
            }
        )

    payload = {
        "manifest": _manifest(
            "order",
            args.file,
            {
                "k_max": args.k_max,
                "extend_cost": args.extend_cost,
                "zero_samples": args.zero_samples,
                "zero_box": args.zero_box,
                "zero_tol": args.zero_tol,
                "seed": args.seed,
            },
        ).as_dict(),
        "notes": notes,
        "found": report.found,
        "evidence": evidence_payload,
    }
    if report.found:
        lines.append(f"k = {report.k}, q = {_q_text(report.q)}")
        payload.update(
            {
                "k": report.k,
                "q": _q_text(report.q),
                "q_numerator": report.q.numerator,
                "q_denominator": report.q.denominator,
            }
        )
        _emit(args, lines, payload)
        return EXIT_OK
    lines.append(f"order not found up to k = {report.truncated_at}")
    payload["truncated_at"] = report.truncated_at
    _emit(args, lines, payload)
    return EXIT_TRUNCATED


# ---------------------------------------------------------------------------
# brackets
# ---------------------------------------------------------------------------


def cmd_brackets(args) -> int:
    sys_model = _load_system(args.file)
    notes: list[str] = []
    sys_model = _prepare(sys_model, args.extend_cost, notes)
    if args.depth < 0:
        raise CliError("--depth must be >= 0", EXIT_INPUT)

    lines = list(notes)
    rows = []
    for k in range(args.depth + 1):
        for i, g in enumerate(sys_model.inputs):
            field = ad_pow(sys_model.drift, g, k)
            name = f"g{i + 1}" if k == 0 else f"ad_f^{k} g{i + 1}"
            lines.append(f"{name} = {field}")
            rows.append({"kind": "ad", "k": k, "i": i + 1, "components": [to_text(c) for c in field.components]})
        if k >= 1:
            for i, gi in enumerate(sys_model.inputs):
                base = ad_pow(sys_model.drift, gi, k - 1)
                for j, gj in enumerate(sys_model.inputs):
                    field = lie_bracket(gj, base)
                    lines.append(f"[g{j + 1}, ad_f^{k - 1} g{i + 1}] = {field}")
                    rows.append(
                        {
                            "kind": "b",
                            "k": k,
                            "i": i + 1,
                            "j": j + 1,
                            "components": [to_text(c) for c in field.components],
                        }
                    )

    payload = {
        "manifest": _manifest(
            "brackets", args.file, {"depth": args.depth, "extend_cost": args.extend_cost}
        ).as_dict(),
        "notes": notes,
        "rows": rows,
    }
    _emit(args, lines, payload)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _parse_policy(args, m: int):
    text = args.policy
    if text == "bang":
        return BangBang(deadband=args.deadband)
    if text.startswith("fixed:"):
        u = _parse_vector(text[len("fixed:"):], m, "--policy fixed")
        return FixedControl(u)
    if text.startswith("piecewise:"):
        path = text[len("piecewise:"):]
        try:
            rows = json.loads(Path(path).read_text(encoding="utf-8"))
            table = tuple((float(t), tuple(float(v) for v in u)) for t, u in rows)
            return PiecewiseControl(table)
        except (OSError, ValueError, TypeError, json.JSONDecodeError) as err:
            raise CliError(f"bad piecewise control file '{path}': {err}", EXIT_INPUT) from err
    raise CliError(
        "policy must be 'bang', 'fixed:u1,..,um', or 'piecewise:FILE'", EXIT_INPUT
    )


def cmd_simulate(args) -> int:
    sys_model = _load_system(args.file)
    _validate_or_die(sys_model, args.horizon)
    notes: list[str] = []
    sys_model = _prepare(sys_model, args.extend_cost, notes)

    x0 = _parse_vector(args.x0, sys_model.n, "--x0")
    p0 = _parse_vector(args.p0, sys_model.n, "--p0")
    policy = _parse_policy(args, sys_model.m)
    try:
        config = SimConfig(
            initial_state=x0,
            initial_adjoint=p0,
            lam=args.lam,
            horizon=args.horizon,
            step=args.step,
            control_policy=policy,
            singular_tolerance=args.singular_tol,
            singular_min_length=args.singular_min_len,
        )
    except ValueError as err:
        raise CliError(f"bad simulation options: {err}", EXIT_INPUT) from err

    traj = integrate_extremal(sys_model, config)
    out_path = Path(args.out)
    if traj.samples:
        traj.write_csv(out_path)

    intervals = detect_singular_intervals(traj, config)
    drift = abs(float(traj.H[-1] - traj.H[0])) if traj.samples else float("nan")

    lines = list(notes)
    lines.append(f"wrote {traj.samples} samples to {out_path}")
    lines.append(f"status: {traj.status}")
    for i, runs in enumerate(intervals.per_input):
        if runs:
            spans = ", ".join(f"[{a:.6g}, {b:.6g}]" for a, b in runs)
            lines.append(f"input {i + 1}: singular on {spans}")
        else:
            lines.append(f"input {i + 1}: no singular interval")
    lines.append(f"H drift |H(T) - H(0)| = {drift:.6g}")

    payload = {
        "manifest": _manifest(
            "simulate",
            args.file,
            {
                "x0": list(x0),
                "p0": list(p0),
                "lambda": args.lam,
                "horizon": args.horizon,
                "step": args.step,
                "policy": args.policy,
                "deadband": args.deadband,
                "singular_tol": args.singular_tol,
                "singular_min_len": args.singular_min_len,
                "extend_cost": args.extend_cost,
                "out": str(out_path),
            },
        ).as_dict(),
        "notes": notes,
        "samples": traj.samples,
        "status": traj.status,
        "failure_time": traj.failure_time,
        "singular_intervals": [
            [[a, b] for a, b in runs] for runs in intervals.per_input
        ],
        "H_drift": drift,
        "out": str(out_path),
    }
    _emit(args, lines, payload)
    if traj.status == "diverged":
        return EXIT_DIVERGED
    if traj.status == "eval_error":
        return EXIT_DIVERGED
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _default_vector(n: int, kind: str) -> tuple[float, ...]:
    if kind == "state":
        return tuple(0.1 * (i + 1) for i in range(n))
    return tuple(1.0 / (i + 1) for i in range(n))


def cmd_verify(args) -> int:
    sys_model = _load_system(args.file)
    _validate_or_die(sys_model, args.horizon)
    notes: list[str] = []
    sys_model = _prepare(sys_model, args.extend_cost, notes)
    policy = _policy_from_args(args)
    suites = ("parity", "identities", "lemma1") if args.suite == "all" else (args.suite,)

    lines = list(notes)
    results = []
    failed = False

    def record(name: str, status: str, detail: str) -> None:
        nonlocal failed
        if status == "FAIL":
            failed = True
        lines.append(f"{name:<10} {status}  {detail}".rstrip())
        results.append({"suite": name, "status": status, "detail": detail})

    for suite in suites:
        if suite == "parity":
            if sys_model.m != 1:
                record("parity", "SKIPPED", f"m = {sys_model.m}, single-input only")
                continue
            check = verify_single_input_parity(sys_model, args.k_max, policy)
            if not check.report.found:
                record("parity", "SKIPPED", f"order not found up to k = {args.k_max}")
            elif check.k_even:
                record("parity", "PASS", f"k = {check.report.k} is even")
            else:
                record("parity", "FAIL", f"k = {check.report.k} is odd: implementation bug")
        elif suite == "identities":
            if sys_model.m != 1:
                record("identities", "SKIPPED", f"m = {sys_model.m}, single-input only")
                continue
            report = verify_bracket_identities(sys_model, policy, depth_cap=args.k_max)
            bad = [c for c in report.checks if not c.passed]
            if bad:
                record(
                    "identities",
                    "FAIL",
                    f"k* = {report.k_star}: " + "; ".join(f"{c.name} ({c.detail})" for c in bad),
                )
            else:
                record(
                    "identities",
                    "PASS",
                    f"k* = {report.k_star}{' (capped)' if report.capped else ''},"
                    f" {len(report.checks)} checks",
                )
        elif suite == "lemma1":
            x0 = (
                _parse_vector(args.x0, sys_model.n, "--x0")
                if args.x0
                else _default_vector(sys_model.n, "state")
            )
            p0 = (
                _parse_vector(args.p0, sys_model.n, "--p0")
                if args.p0
                else _default_vector(sys_model.n, "adjoint")
            )
            u_fixed = tuple(0.3 + 0.2 * i for i in range(sys_model.m))
            residuals = {}
            ratios_ok = True
            worst = 0.0
            for name, field in [("f", sys_model.drift)] + [
                (f"g{i + 1}", g) for i, g in enumerate(sys_model.inputs)
            ]:
                res_h = _lemma1_residual(sys_model, x0, p0, u_fixed, args.step, args.horizon, field)
                res_h2 = _lemma1_residual(
                    sys_model, x0, p0, u_fixed, args.step / 2.0, args.horizon, field
                )
                residuals[name] = {"h": res_h, "h/2": res_h2}
                worst = max(worst, res_h)
                if res_h > 1e-12 and not res_h2 <= res_h / 3.0:
                    ratios_ok = False
            if worst < args.lemma1_tol and ratios_ok:
                record(
                    "lemma1",
                    "PASS",
                    f"max residual {worst:.3g} < {args.lemma1_tol:g}, halving contracts >= 3x",
                )
            else:
                record(
                    "lemma1",
                    "FAIL",
                    f"max residual {worst:.3g} (tol {args.lemma1_tol:g}),"
                    f" contraction {'ok' if ratios_ok else 'violated'}",
                )
        else:
            raise CliError(f"unknown suite '{suite}'", EXIT_INPUT)

    payload = {
        "manifest": _manifest(
            "verify",
            args.file,
            {
                "suite": args.suite,
                "k_max": args.k_max,
                "zero_samples": args.zero_samples,
                "zero_box": args.zero_box,
                "zero_tol": args.zero_tol,
                "seed": args.seed,
                "step": args.step,
                "horizon": args.horizon,
                "lemma1_tol": args.lemma1_tol,
                "extend_cost": args.extend_cost,
            },
        ).as_dict(),
        "notes": notes,
        "results": results,
    }
    _emit(args, lines, payload)
    return EXIT_VERIFY if failed else EXIT_OK


def _lemma1_residual(sys_model, x0, p0, u_fixed, step, horizon, field) -> float:
    config = SimConfig(
        initial_state=x0,
        initial_adjoint=p0,
        horizon=horizon,
        step=step,
        control_policy=FixedControl(u_fixed),
    )
    traj = integrate_extremal(sys_model, config)
    if traj.status != "ok":
        raise CliError(f"lemma1 probe integration failed ({traj.status})", EXIT_DIVERGED)
    return check_lemma1(sys_model, traj, field)


# ---------------------------------------------------------------------------
# local-order
# ---------------------------------------------------------------------------


def cmd_local_order(args) -> int:
    sys_model = _load_system(args.file)
    notes: list[str] = []
    sys_model = _prepare(sys_model, args.extend_cost, notes)
    x = _parse_vector(args.x0, sys_model.n, "--x0")
    p = _parse_vector(args.p0, sys_model.n, "--p0")
    try:
        result = local_order_at(sys_model, x, p, args.k_max, args.tolerance)
    except ExprError as err:
        raise CliError(str(err), EXIT_INPUT) from err

    lines = list(notes)
    payload = {
        "manifest": _manifest(
            "local-order",
            args.file,
            {
                "x0": list(x),
                "p0": list(p),
                "k_max": args.k_max,
                "tolerance": args.tolerance,
                "extend_cost": args.extend_cost,
            },
        ).as_dict(),
        "notes": notes,
        "found": result.found,
    }
    if result.found:
        lines.append(f"k_local = {result.k_local}")
        for row in result.b_values:
            lines.append("  [" + ", ".join(f"{v: .6g}" for v in row) + "]")
        lines.append(f"rank = {result.rank_estimate}")
        payload.update(
            {
                "k_local": result.k_local,
                "b_values": [list(row) for row in result.b_values],
                "rank": result.rank_estimate,
            }
        )
        _emit(args, lines, payload)
        return EXIT_OK
    lines.append(f"local order not found up to k = {args.k_max}")
    payload["k_max"] = args.k_max
    _emit(args, lines, payload)
    return EXIT_TRUNCATED


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------


def _add_zero_test_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--zero-samples", type=int, default=32, metavar="N")
    p.add_argument("--zero-box", type=float, default=1.0, metavar="R")
    p.add_argument("--zero-tol", type=float, default=1e-9, metavar="R")
    p.add_argument("--seed", type=int, default=1729, metavar="N")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctrlorder",
        description="Intrinsic order of affine optimal control problems via Lie brackets",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_order = sub.add_parser("order", help="determine the problem order q = k/2")
    p_order.add_argument("file")
    p_order.add_argument("--k-max", dest="k_max", type=int, default=10, metavar="N")
    p_order.add_argument("--extend-cost", dest="extend_cost", action="store_true")
    p_order.add_argument("--horizon", type=float, default=1.0, metavar="R")
    p_order.add_argument("--json", action="store_true")
    _add_zero_test_args(p_order)
    p_order.set_defaults(func=cmd_order)

    p_br = sub.add_parser("brackets", help="print iterated bracket fields up to a depth")
    p_br.add_argument("file")
    p_br.add_argument("--depth", type=int, default=2, metavar="N")
    p_br.add_argument("--extend-cost", dest="extend_cost", action="store_true")
    p_br.add_argument("--json", action="store_true")
    p_br.set_defaults(func=cmd_brackets)

    p_sim = sub.add_parser("simulate", help="integrate an extremal and export it")
    p_sim.add_argument("file")
    p_sim.add_argument("--x0", required=True, metavar="v1,..,vn")
    p_sim.add_argument("--p0", required=True, metavar="v1,..,vn")
    p_sim.add_argument("--lambda", dest="lam", type=int, choices=(0, 1), default=1)
    p_sim.add_argument("--horizon", type=float, default=1.0, metavar="R")
    p_sim.add_argument("--step", type=float, default=1e-3, metavar="R")
    p_sim.add_argument("--policy", default="bang", metavar="bang|fixed:u1,..|piecewise:FILE")
    p_sim.add_argument("--deadband", type=float, default=0.0, metavar="R")
    p_sim.add_argument("--singular-tol", dest="singular_tol", type=float, default=1e-6)
    p_sim.add_argument("--singular-min-len", dest="singular_min_len", type=float, default=None)
    p_sim.add_argument("--extend-cost", dest="extend_cost", action="store_true")
    p_sim.add_argument("--out", default="trajectory.csv", metavar="PATH")
    p_sim.add_argument("--json", action="store_true")
    p_sim.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser("verify", help="run parity / identity / derivative-law suites")
    p_ver.add_argument("file")
    p_ver.add_argument("suite", choices=("parity", "identities", "lemma1", "all"))
    p_ver.add_argument("--k-max", dest="k_max", type=int, default=10, metavar="N")
    p_ver.add_argument("--horizon", type=float, default=1.0, metavar="R")
    p_ver.add_argument("--step", type=float, default=1e-3, metavar="R")
    p_ver.add_argument("--lemma1-tol", dest="lemma1_tol", type=float, default=1e-4)
    p_ver.add_argument("--x0", default=None, metavar="v1,..,vn")
    p_ver.add_argument("--p0", default=None, metavar="v1,..,vn")
    p_ver.add_argument("--extend-cost", dest="extend_cost", action="store_true")
    p_ver.add_argument("--json", action="store_true")
    _add_zero_test_args(p_ver)
    p_ver.set_defaults(func=cmd_verify)

    p_loc = sub.add_parser("local-order", help="local order at one (x, p) point")
    p_loc.add_argument("file")
    p_loc.add_argument("--x0", required=True, metavar="v1,..,vn")
    p_loc.add_argument("--p0", required=True, metavar="v1,..,vn")
    p_loc.add_argument("--k-max", dest="k_max", type=int, default=10, metavar="N")
    p_loc.add_argument("--tolerance", type=float, default=1e-9, metavar="R")
    p_loc.add_argument("--extend-cost", dest="extend_cost", action="store_true")
    p_loc.add_argument("--json", action="store_true")
    p_loc.set_defaults(func=cmd_local_order)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        # argparse exits 2 on bad flags; fold into the input-error contract
        return EXIT_INPUT if err.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except CliError as err:
        print(str(err), file=_sys.stderr)
        return err.code
    except ExprError as err:
        print(str(err), file=_sys.stderr)
        return EXIT_INPUT


def entry() -> None:
    raise SystemExit(main())
