"""Command-line front end.

Exit codes: 0 all checks pass, 1 a mathematical check failed, 2 input or usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .certify import isolate_criticals
from .entropy import LambdaProfile, SardParameters, covering_number, sard_compare, sard_csv
from .jetcalc import ComponentMap, GradientMap, ParseError, SpecError, estimate_budget, parse, spec_from_json
from .jetcalc.grids import ball_grid
from .morse import AnalysisError, ConstantsError, compute_constants, morse_chart, run_analysis
from .morse.perturb import PerturbedField

TOOL = "qmorse"
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
TIMING_KEYS = ("timing",)


class InputError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    epsilon: float = 0.1
    grid: int = 64
    c_constant: float = 1.0
    newton_tol: float = 1e-10
    quadrature_max: int = 64
    seed: int = 0
    perturb: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InputError("--epsilon must be positive")
        if self.grid < 8:
            raise InputError("--grid must be at least 8")
        if not (self.c_constant > 0 and self.newton_tol > 0):
            raise InputError("--c and --newton-tol must be positive")
        if self.quadrature_max < 8:
            raise InputError("--quadrature-max must be at least 8")


# --------------------------------------------------------------------------
# serialization


def _plain(obj):
    """JSON-ready copy: numpy to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return _plain(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def dumps(obj) -> str:
    # repr of a float is the shortest string that round-trips exactly
    return json.dumps(_plain(obj), indent=2, allow_nan=False) + "\n"


def _write(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# inputs


def read_spec(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    return text, spec_from_text(text)


def spec_from_text(text: str):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"spec is not valid JSON: {exc}") from exc
    try:
        return spec_from_json(obj)
    except ParseError as exc:
        raise InputError(f"expression error: {exc}") from exc
    except (SpecError, TypeError, ValueError) as exc:
        raise InputError(f"invalid spec: {exc}") from exc


def map_from_text(text: str):
    """Map for the Sard table: explicit ``components`` or the gradient map.

    Returns ``(F, k, K_lip)`` with ``k`` the smoothness of ``F`` and ``K_lip``
    the grid estimate of ``sup |D^k F|``.
    """
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"spec is not valid JSON: {exc}") from exc
    try:
        if isinstance(obj, dict) and "components" in obj:
            fields = [
                parse(str(e), int(obj["dim"]), int(obj["k"]), float(obj.get("domain_radius", 1.0)))
                for e in obj["components"]
            ]
            if not fields:
                raise InputError("components must be non-empty")
            k = fields[0].order
            K_lip = max(estimate_budget(fi, 32).per_order_sup[k - 1] for fi in fields)
            return ComponentMap(fields), k, K_lip
        f = spec_from_json(obj)
    except ParseError as exc:
        raise InputError(f"expression error: {exc}") from exc
    except (KeyError, SpecError, TypeError, ValueError) as exc:
        raise InputError(f"invalid spec: {exc}") from exc
    # D^(k-2) of the gradient map is D^(k-1) f, Lipschitz with constant sup |D^k f|
    return GradientMap(f), f.order - 1, estimate_budget(f, 32).per_order_sup[f.order - 1]


def _config(args) -> RunConfig:
    return RunConfig(
        epsilon=args.epsilon,
        grid=args.grid,
        c_constant=args.c,
        newton_tol=args.newton_tol,
        quadrature_max=args.quadrature_max,
        seed=args.seed,
        perturb=not getattr(args, "no_perturb", False),
    )


# --------------------------------------------------------------------------
# analyze / verify


def analysis_report(text: str, cfg: RunConfig) -> tuple[dict, bool]:
    """Run the full construction on spec ``text``; returns ``(report, passed)``."""
    f0 = spec_from_text(text)
    a = run_analysis(
        f0,
        cfg.epsilon,
        grid=cfg.grid,
        c=cfg.c_constant,
        newton_tol=cfg.newton_tol,
        perturb=cfg.perturb,
        quadrature_max=cfg.quadrature_max,
    )
    report = {
        "tool": TOOL,
        "tool_version": __version__,
        "command": "analyze",
        "input": {"sha256": hashlib.sha256(text.encode()).hexdigest(), "content": text},
        "config": asdict(cfg),
        "budget": a.budget.to_json(),
        "constants": a.constants.to_json(),
        "regular_value": a.regular_value.to_json() if a.regular_value else None,
        "perturbation": a.perturbation.to_json() if a.perturbation else None,
        "certificates": [c.to_json() for c in a.isolation.certificates],
        "near_degenerate": [c.to_json() for c in a.isolation.near_degenerate],
        "charts": [ch.to_json() for ch in a.charts],
        "verification": a.verification.to_json(),
        "notes": list(a.notes),
        "timing": dict(a.timing),
    }
    return report, a.passed


def _summary(report: dict) -> str:
    ver = report["verification"]
    items = " ".join(f"({k}) {'pass' if ver[k]['passed'] else 'FAIL'}" for k in ("i", "ii", "iii", "iv", "v"))
    return f"{len(report['certificates'])} certificate(s); {items}"


def cmd_analyze(args) -> int:
    cfg = _config(args)
    text, _ = read_spec(args.spec)
    try:
        report, passed = analysis_report(text, cfg)
    except AnalysisError as exc:
        print(f"analysis failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _write(dumps(report), args.out)
    print(_summary(report), file=sys.stderr)
    return EXIT_OK if passed else EXIT_FAIL


def _diff(a, b, path="") -> list[str]:
    if isinstance(a, dict) and isinstance(b, dict):
        out = []
        for key in sorted(set(a) | set(b)):
            if key in TIMING_KEYS and not path:
                continue
            if key not in a or key not in b:
                out.append(f"{path}/{key}: present in only one report")
            else:
                out.extend(_diff(a[key], b[key], f"{path}/{key}"))
        return out
    if isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            return [f"{path}: length {len(a)} != {len(b)}"]
        return [d for i, (x, y) in enumerate(zip(a, b)) for d in _diff(x, y, f"{path}/{i}")]
    return [] if a == b else [f"{path}: stored {a!r}, recomputed {b!r}"]


def cmd_verify(args) -> int:
    try:
        stored = json.loads(Path(args.report).read_text())
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read report {args.report}: {exc}") from exc
    if not isinstance(stored, dict) or stored.get("tool") != TOOL or stored.get("command") != "analyze":
        raise InputError("not an analyze report of this tool")
    try:
        text = stored["input"]["content"]
        digest = stored["input"]["sha256"]
        cfg = RunConfig(**stored["config"])
    except (KeyError, TypeError) as exc:
        raise InputError(f"report is missing fields: {exc}") from exc
    if hashlib.sha256(text.encode()).hexdigest() != digest:
        raise InputError("input digest does not match the stored spec content")
    if stored.get("tool_version") != __version__:
        print(f"warning: report from version {stored.get('tool_version')}, running {__version__}", file=sys.stderr)
    try:
        fresh, _ = analysis_report(text, cfg)
    except AnalysisError as exc:
        print(f"analysis failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    diffs = _diff(stored, json.loads(dumps(fresh)))
    if diffs:
        for d in diffs[:20]:
            print(f"mismatch {d}", file=sys.stderr)
        return EXIT_FAIL
    print("report reproduces: " + _summary(fresh), file=sys.stderr)
    return EXIT_OK


# --------------------------------------------------------------------------
# sard / chart / cover


def cmd_sard(args) -> int:
    text = _read_text(args.spec)
    F, k, K_lip = map_from_text(text)
    q = min(F.dim_in, F.dim_out)
    lambdas = args.lambdas if len(args.lambdas) != 1 else args.lambdas * q
    try:
        L = LambdaProfile(tuple(lambdas))
        if L.q != q:
            raise InputError(f"need {q} lambda values, got {L.q}")
        p = SardParameters(F.dim_in, F.dim_out, k, args.radius or F.domain_radius, args.k_lip or K_lip, args.c, args.delta)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    bad = [e for e in args.epsilons if not 0 < e <= args.delta]
    if bad:
        raise InputError(f"every epsilon must lie in (0, delta = {args.delta}]; got {bad}")
    rows = sard_compare(F, L, p, args.epsilons, grid=args.grid)
    _write(sard_csv(rows), args.out)
    if any(r.exceeds for r in rows):
        print("empirical count exceeds the bound at some epsilon: the constant c is too small", file=sys.stderr)
    return EXIT_OK


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def cmd_chart(args) -> int:
    cfg = _config(args)
    text, f0 = read_spec(args.spec)
    budget = estimate_budget(f0, cfg.grid)
    if budget.K == 0:
        print("constant function: every point is critical", file=sys.stderr)
        return EXIT_FAIL
    try:
        mc = compute_constants(budget.K, cfg.epsilon, f0.dim, f0.order, cfg.c_constant)
    except ConstantsError as exc:
        raise InputError(str(exc)) from exc
    f = PerturbedField(f0, np.zeros(f0.dim))
    iso = isolate_criticals(f, budget, mc.psi1, cfg.grid, cfg.newton_tol)
    certs = iso.certificates
    if args.point is not None:
        if len(args.point) != f0.dim:
            raise InputError(f"--point needs {f0.dim} coordinates")
        x = np.array(args.point, dtype=float)
        certs = [c for c in certs if np.linalg.norm(c.point - x) <= args.search_radius]
        certs.sort(key=lambda c: float(np.linalg.norm(c.point - x)))
    if not certs:
        print("no certified critical point found", file=sys.stderr)
        return EXIT_FAIL
    chart = morse_chart(f, certs[0], mc, radius=args.radius, quadrature_max=cfg.quadrature_max)
    record = {
        "tool": TOOL,
        "tool_version": __version__,
        "command": "chart",
        "input": {"sha256": hashlib.sha256(text.encode()).hexdigest(), "content": text},
        "config": asdict(cfg),
        "certificate": certs[0].to_json(),
        "chart": chart.to_json(),
    }
    _write(dumps(record), args.out)
    if args.table:
        pts = ball_grid(f0.dim, args.samples, chart.radius, chart.center) if chart.radius > 0 else chart.center[None, :]
        y = chart(pts)
        res = chart.residuals(pts)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = f0.dim
        w.writerow([f"x{i + 1}" for i in range(n)] + [f"phi{i + 1}" for i in range(n)] + ["residual"])
        for xi, yi, ri in zip(pts, y, res):
            w.writerow([repr(float(v)) for v in xi] + [repr(float(v)) for v in yi] + [repr(float(ri))])
        Path(args.table).write_text(buf.getvalue())
    tol = 1e-8 * (1 + mc.K)
    return EXIT_OK if chart.residual_sup <= tol and chart.radius > 0 else EXIT_FAIL


def cmd_cover(args) -> int:
    try:
        pts = np.loadtxt(args.points, delimiter=",", ndmin=2, dtype=float)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read points CSV {args.points}: {exc}") from exc
    if not args.epsilon > 0:
        raise InputError("--epsilon must be positive")
    est = covering_number(pts, args.epsilon)
    out = {
        "epsilon": est.epsilon,
        "upper": est.upper,
        "lower": est.lower,
        "method": est.method,
        "points": int(len(pts)),
        "centers": np.asarray(est.centers).tolist(),
    }
    _write(dumps(out), args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def _run_options(p: argparse.ArgumentParser):
    p.add_argument("--epsilon", type=float, default=0.1, help="perturbation size (default 0.1)")
    p.add_argument("--grid", type=int, default=64, help="grid resolution per axis (default 64)")
    p.add_argument("--c", type=float, default=1.0, help="the constant c in the regularity level (default 1)")
    p.add_argument("--newton-tol", type=float, default=1e-10, help="gradient tolerance for critical points")
    p.add_argument("--quadrature-max", type=int, default=64, help="max Gauss-Legendre nodes per panel")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized sampling (all current stages are deterministic)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=TOOL, description="Quantitative Morse analysis of smooth functions on a ball.")
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="perturb to a quantitative Morse function and verify all claims")
    p.add_argument("spec", help="function spec JSON")
    _run_options(p)
    p.add_argument("--no-perturb", action="store_true", help="check the raw function without perturbing it")
    p.add_argument("--out", help="report path (default stdout)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sard", help="empirical covering counts of near-critical values against the Sard bound")
    p.add_argument("spec", help="function spec JSON (gradient map) or {dim, k, components: [...]}")
    p.add_argument("--lambdas", type=float, nargs="+", required=True, help="singular value thresholds")
    p.add_argument("--epsilons", type=float, nargs="+", required=True, help="covering radii")
    p.add_argument("--delta", type=float, default=1.0, help="value-ball radius (default 1)")
    p.add_argument("--radius", type=float, help="domain ball radius r (default the spec's)")
    p.add_argument("--k-lip", type=float, help="Lipschitz constant of the top derivative (default grid estimate)")
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_sard)

    p = sub.add_parser("chart", help="normal-form chart at one critical point")
    p.add_argument("spec", help="function spec JSON")
    _run_options(p)
    p.add_argument("--point", type=float, nargs="+", help="pick the critical point nearest to this point")
    p.add_argument("--search-radius", type=float, default=0.1, help="max distance from --point (default 0.1)")
    p.add_argument("--radius", type=float, help="chart radius (default psi3)")
    p.add_argument("--samples", type=int, default=11, help="table grid points per axis (default 11)")
    p.add_argument("--out", help="chart JSON path (default stdout)")
    p.add_argument("--table", help="CSV of x, phi(x), residual rows")
    p.set_defaults(func=cmd_chart)

    p = sub.add_parser("cover", help="covering-number estimate of a point cloud")
    p.add_argument("points", help="CSV with one point per row")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--out", help="JSON path (default stdout)")
    p.set_defaults(func=cmd_cover)

    p = sub.add_parser("verify", help="recompute an analyze report and compare")
    p.add_argument("report", help="report JSON written by analyze")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
