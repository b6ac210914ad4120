"""Batch front end: load a system description, solve, write results.

System files are YAML documents with the following fields (all required
unless noted)::

    state_vars: [x1, x2]
    control_vars: [u]
    perturbation_vars: [w]
    horizon: 2
    transition: ["3*x1*x2 + w*u", "2*x2 + x1"]   # one expression per state var
    allowed: ["-1 <= x1", "x1 <= 1", "-1 <= x2", "x2 <= 1"]
    control_domain: {u: [-0.5, 0.5]}
    perturbation_domain: {w: [-0.1, 0.1]}
    initial_box: {x1: [-1, 1], x2: [-1, 1]}

`allowed` is a list of "expr <= expr" inequalities over the state
variables, or a list of such lists (one per stage, horizon+1 entries).
The two domain fields map each variable to a [lo, hi] pair and may also
be lists of such mappings (one per stage).  Numeric endpoints may be
given as strings ("0.1") to request exact-decimal outward rounding;
plain YAML numbers are taken as the binary64 values they parse to.

Exit codes: 0 success, 2 usage/input error, 3 no certified box found in
single mode, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import yaml

from .constraints import AtomLE, Conj, Constraint, Truth
from .errors import ExprParseError, QuantpaveError, SystemValidationError
from .expr import parse_expr, VecExpr
from .intervals import Box, Interval, _next_down, _next_up
from .solver import CacheStore, Paving, SolveStats, SolverConfig, find_single_true, pave
from .system import DiscreteSystem, unroll_composed, unroll_naive

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_TRUE_BOX = 3
EXIT_IO = 4


@dataclass
class RunRequest:
    """One batch run: which system, which mode, where the outputs go."""

    system_path: str
    mode: str = "pave"
    target_err: float = 0.2
    min_width: float = 2.0**-10
    cache_rel_eps: float = 0.25
    quantifier_min_width: float = 2.0**-6
    unrolling: str = "composed"
    csv_path: str | None = None
    svg_path: str | None = None
    stats_path: str | None = None


def _endpoint(value, lower: bool, context: str) -> float:
    """Turn a YAML scalar into an interval endpoint.  Strings are exact
    decimals rounded outward for the endpoint's role; numbers are taken
    at face value."""
    if isinstance(value, bool) or value is None:
        raise SystemValidationError([f"{context}: expected a number, got {value!r}"])
    if isinstance(value, str):
        try:
            r = Fraction(value)
        except ValueError:
            raise SystemValidationError(
                [f"{context}: cannot parse {value!r} as a decimal"]
            ) from None
        f = float(r)
        exact = Fraction(f)
        if exact == r:
            return f
        if lower:
            return f if exact < r else _next_down(f)
        return f if exact > r else _next_up(f)
    if isinstance(value, (int, float)):
        return float(value)
    raise SystemValidationError([f"{context}: expected a number, got {value!r}"])


def _parse_pair(raw, context: str) -> Interval:
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise SystemValidationError([f"{context}: expected a [lo, hi] pair, got {raw!r}"])
    lo = _endpoint(raw[0], lower=True, context=context)
    hi = _endpoint(raw[1], lower=False, context=context)
    if lo > hi:
        raise SystemValidationError([f"{context}: lo {lo} exceeds hi {hi}"])
    return Interval(lo, hi)


def _parse_box(raw, var_names: tuple[str, ...], context: str) -> Box:
    if not isinstance(raw, dict):
        raise SystemValidationError(
            [f"{context}: expected a mapping of variable to [lo, hi], got {raw!r}"]
        )
    missing = [v for v in var_names if v not in raw]
    if missing:
        raise SystemValidationError([f"{context}: missing bounds for {missing}"])
    extra = [k for k in raw if k not in var_names]
    if extra:
        raise SystemValidationError([f"{context}: bounds for unknown variables {extra}"])
    return Box(
        var_names, tuple(_parse_pair(raw[v], f"{context}.{v}") for v in var_names)
    )


def _parse_atom(text: str, state_vars: tuple[str, ...], context: str) -> AtomLE:
    if not isinstance(text, str) or text.count("<=") != 1:
        raise SystemValidationError(
            [f"{context}: expected one inequality 'expr <= expr', got {text!r}"]
        )
    lhs_text, rhs_text = text.split("<=")
    try:
        return AtomLE(
            parse_expr(lhs_text, state_vars), parse_expr(rhs_text, state_vars)
        )
    except ExprParseError as exc:
        raise SystemValidationError([f"{context}: {exc}"]) from None


def _parse_allowed(raw, state_vars, horizon) -> list[Constraint]:
    if not isinstance(raw, list) or not raw:
        raise SystemValidationError(["allowed: expected a non-empty list"])
    if all(isinstance(e, str) for e in raw):
        stages = [raw]
    elif all(isinstance(e, list) for e in raw):
        stages = raw
    else:
        raise SystemValidationError(
            ["allowed: mix of strings and lists; use one inequality list or one per stage"]
        )
    out = []
    for k, stage in enumerate(stages):
        atoms = tuple(
            _parse_atom(text, state_vars, f"allowed[{k}][{i}]")
            for i, text in enumerate(stage)
        )
        out.append(Conj(atoms))
    return out


def _parse_domains(raw, var_names, horizon, what) -> list[Box]:
    if isinstance(raw, dict):
        return [_parse_box(raw, var_names, what)]
    if isinstance(raw, list):
        return [
            _parse_box(entry, var_names, f"{what}[{k}]") for k, entry in enumerate(raw)
        ]
    raise SystemValidationError(
        [f"{what}: expected a mapping or a per-stage list of mappings, got {raw!r}"]
    )


_REQUIRED_FIELDS = (
    "state_vars",
    "control_vars",
    "perturbation_vars",
    "horizon",
    "transition",
    "allowed",
    "initial_box",
)


def load_system(path: str | Path) -> DiscreteSystem:
    """Parse and validate a system description file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SystemValidationError([f"not valid YAML: {exc}"]) from None
    if not isinstance(doc, dict):
        raise SystemValidationError(["system document must be a mapping"])
    missing = [f for f in _REQUIRED_FIELDS if f not in doc]
    if missing:
        raise SystemValidationError([f"missing required field {f!r}" for f in missing])
    horizon = doc["horizon"]
    if not isinstance(horizon, int) or isinstance(horizon, bool) or horizon < 0:
        raise SystemValidationError(
            [f"horizon: expected a non-negative integer, got {horizon!r}"]
        )
    for field_name in ("control_domain", "perturbation_domain"):
        if horizon > 0 and field_name not in doc:
            raise SystemValidationError([f"missing required field {field_name!r}"])

    def name_list(field_name: str) -> tuple[str, ...]:
        raw = doc[field_name]
        if (
            not isinstance(raw, list)
            or not raw
            or not all(isinstance(v, str) for v in raw)
        ):
            raise SystemValidationError(
                [f"{field_name}: expected a non-empty list of names, got {raw!r}"]
            )
        return tuple(raw)

    state_vars = name_list("state_vars")
    control_vars = name_list("control_vars")
    perturbation_vars = name_list("perturbation_vars")
    declared = state_vars + control_vars + perturbation_vars

    raw_transition = doc["transition"]
    if not isinstance(raw_transition, list) or not all(
        isinstance(t, str) for t in raw_transition
    ):
        raise SystemValidationError(
            [f"transition: expected a list of expression strings, got {raw_transition!r}"]
        )
    try:
        components = tuple(parse_expr(t, declared) for t in raw_transition)
    except ExprParseError as exc:
        raise SystemValidationError([f"transition: {exc}"]) from None
    if len(components) != len(state_vars):
        raise SystemValidationError(
            [
                f"transition has {len(components)} components for "
                f"{len(state_vars)} state variables"
            ]
        )
    transition = VecExpr(components, state_vars)

    allowed = _parse_allowed(doc["allowed"], state_vars, horizon)
    control_domain = (
        _parse_domains(doc["control_domain"], control_vars, horizon, "control_domain")
        if horizon > 0
        else []
    )
    perturbation_domain = (
        _parse_domains(
            doc["perturbation_domain"], perturbation_vars, horizon, "perturbation_domain"
        )
        if horizon > 0
        else []
    )
    initial_box = _parse_box(doc["initial_box"], state_vars, "initial_box")

    system = DiscreteSystem(
        state_vars=state_vars,
        control_vars=control_vars,
        perturbation_vars=perturbation_vars,
        horizon=horizon,
        transition=transition,
        allowed=tuple(allowed),
        control_domain=tuple(control_domain),
        perturbation_domain=tuple(perturbation_domain),
        initial_box=initial_box,
    )
    return system.check()


def dump_system(s: DiscreteSystem) -> str:
    """Serialize a system back to the YAML document format (full
    per-stage lists; loading the result gives an equivalent system)."""

    def atoms_of(c: Constraint) -> list[str]:
        if isinstance(c, AtomLE):
            return [f"{c.lhs.to_text()} <= {c.rhs.to_text()}"]
        assert isinstance(c, Conj)
        out: list[str] = []
        for p in c.parts:
            out.extend(atoms_of(p))
        return out

    def box_mapping(b: Box) -> dict[str, list[float]]:
        return {n: [iv.lo, iv.hi] for n, iv in zip(b.names, b.intervals)}

    doc = {
        "state_vars": list(s.state_vars),
        "control_vars": list(s.control_vars),
        "perturbation_vars": list(s.perturbation_vars),
        "horizon": s.horizon,
        "transition": [c.to_text() for c in s.transition.components],
        "allowed": [atoms_of(a) for a in s.allowed],
        "control_domain": [box_mapping(b) for b in s.control_domain],
        "perturbation_domain": [box_mapping(b) for b in s.perturbation_domain],
        "initial_box": box_mapping(s.initial_box),
    }
    return yaml.safe_dump(doc, sort_keys=False)


def format_float(v: float) -> str:
    """Shortest decimal text that parses back to exactly `v`."""
    candidates = [repr(v)]
    if math.isfinite(v) and v == int(v) and abs(v) < 1e17:
        candidates.append("-0" if (v == 0 and math.copysign(1.0, v) < 0) else str(int(v)))
    best = None
    for c in candidates:
        parsed = float(c)
        if parsed == v and math.copysign(1.0, parsed) == math.copysign(1.0, v):
            if best is None or len(c) < len(best):
                best = c
    assert best is not None
    return best


def write_paving_csv(paving: Paving, path: str | Path) -> None:
    """One row per leaf box: `value,<var>_lo,<var>_hi,...` with the state
    variables in declaration order, rows sorted by lower corner, shortest
    round-trip numbers, LF line endings."""
    header = "value," + ",".join(f"{n}_lo,{n}_hi" for n in paving.domain.names)
    rows = []
    for box, truth in paving.boxes:
        corner = tuple(iv.lo for iv in box.intervals)
        upper = tuple(iv.hi for iv in box.intervals)
        cells = [str(truth)]
        for iv in box.intervals:
            cells.append(format_float(iv.lo))
            cells.append(format_float(iv.hi))
        rows.append((corner, upper, ",".join(cells)))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for _, _, line in rows:
            fh.write(line + "\n")


_SVG_FILL = {Truth.TRUE: "green", Truth.FALSE: "red", Truth.UNKNOWN: "white"}
_SVG_SIZE = 800


def write_paving_svg(paving: Paving, path: str | Path) -> None:
    """Render a 2-state paving: one rectangle per leaf (green/red/white
    for T/F/U), black domain border, 800x800 viewport with the second
    state variable increasing upward."""
    if paving.domain.dim != 2:
        raise QuantpaveError("svg requires 2 state variables")
    (x_iv, y_iv) = paving.domain.intervals
    x_span = x_iv.hi - x_iv.lo or 1.0
    y_span = y_iv.hi - y_iv.lo or 1.0

    def sx(v: float) -> float:
        return (v - x_iv.lo) / x_span * _SVG_SIZE

    def sy(v: float) -> float:
        return _SVG_SIZE - (v - y_iv.lo) / y_span * _SVG_SIZE

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_SIZE}" '
        f'height="{_SVG_SIZE}" viewBox="0 0 {_SVG_SIZE} {_SVG_SIZE}" '
        'shape-rendering="crispEdges">',
    ]
    for box, truth in paving.boxes:
        bx, by = box.intervals
        x = sx(bx.lo)
        y = sy(by.hi)
        w = sx(bx.hi) - x
        h = sy(by.lo) - y
        parts.append(
            f'<rect x="{x:.4f}" y="{y:.4f}" width="{w:.4f}" height="{h:.4f}" '
            f'fill="{_SVG_FILL[truth]}"/>'
        )
    parts.append(
        f'<rect x="0" y="0" width="{_SVG_SIZE}" height="{_SVG_SIZE}" '
        'fill="none" stroke="black" stroke-width="2"/>'
    )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def write_stats(
    stats: SolveStats,
    path: str | Path,
    paving: Paving | None = None,
    phases: dict[str, float] | None = None,
    found_box: Box | None = None,
) -> None:
    """Write run statistics as JSON: wall time, box counts by truth
    value, bisections, per-cache query/hit/refine counters, and the time
    breakdown by phase."""
    doc: dict = {
        "wall_time_s": stats.wall_time,
        "atom_evals": stats.atom_evals,
        "bisections": stats.bisections,
        "caches": {
            cache_id: {
                "queries": stats.cache_queries.get(cache_id, 0),
                "memo_hits": stats.memo_hits.get(cache_id, 0),
                "refine_calls": stats.refine_calls.get(cache_id, 0),
            }
            for cache_id in sorted(
                set(stats.cache_queries) | set(stats.refine_calls) | set(stats.memo_hits)
            )
        },
        "phases": phases or {},
    }
    if paving is not None:
        counts = paving.counts()
        doc["boxes"] = {str(t): counts[t] for t in (Truth.TRUE, Truth.FALSE, Truth.UNKNOWN)}
        doc["err"] = paving.err()
        doc["volumes"] = {
            str(t): paving.volume(t) for t in (Truth.TRUE, Truth.FALSE, Truth.UNKNOWN)
        }
    if found_box is not None:
        doc["true_box"] = {
            n: [iv.lo, iv.hi] for n, iv in zip(found_box.names, found_box.intervals)
        }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _format_box(box: Box) -> str:
    return " ".join(
        f"{n} in [{format_float(iv.lo)}, {format_float(iv.hi)}]"
        for n, iv in zip(box.names, box.intervals)
    )


def run(req: RunRequest) -> int:
    """Execute one request; returns the process exit code."""
    t_load = time.perf_counter()
    try:
        system = load_system(req.system_path)
    except FileNotFoundError:
        print(f"error: cannot read {req.system_path}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: cannot read {req.system_path}: {exc}", file=sys.stderr)
        return EXIT_IO
    except SystemValidationError as exc:
        for problem in exc.problems:
            print(f"error: {req.system_path}: {problem}", file=sys.stderr)
        return EXIT_USAGE

    if req.svg_path is not None and len(system.state_vars) != 2:
        print("error: svg requires 2 state variables", file=sys.stderr)
        return EXIT_USAGE
    if req.mode == "single" and (req.csv_path or req.svg_path):
        print("error: csv/svg output is only produced in pave mode", file=sys.stderr)
        return EXIT_USAGE

    try:
        cfg = SolverConfig(
            target_err=req.target_err,
            min_width=req.min_width,
            cache_rel_eps=req.cache_rel_eps,
            quantifier_min_width=req.quantifier_min_width,
            mode="pave" if req.mode == "pave" else "single_true",
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    unroll = unroll_composed if req.unrolling == "composed" else unroll_naive
    constraint = unroll(system)
    load_s = time.perf_counter() - t_load

    caches = CacheStore()
    t_solve = time.perf_counter()
    paving: Paving | None = None
    found: Box | None = None
    if req.mode == "pave":
        paving, stats = pave(constraint, system.initial_box, cfg, caches)
    else:
        found = find_single_true(constraint, system.initial_box, cfg, caches)
        stats = caches.stats
    solve_s = time.perf_counter() - t_solve

    t_write = time.perf_counter()
    try:
        if paving is not None and req.csv_path:
            write_paving_csv(paving, req.csv_path)
        if paving is not None and req.svg_path:
            write_paving_svg(paving, req.svg_path)
        write_s = time.perf_counter() - t_write
        if req.stats_path:
            write_stats(
                stats,
                req.stats_path,
                paving=paving,
                phases={"load_s": load_s, "solve_s": solve_s, "write_s": write_s},
                found_box=found,
            )
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO

    if req.mode == "pave":
        assert paving is not None
        counts = paving.counts()
        print(
            f"paved {req.system_path}: err={format_float(paving.err())} "
            f"T={counts[Truth.TRUE]} F={counts[Truth.FALSE]} U={counts[Truth.UNKNOWN]}"
        )
        return EXIT_OK
    if found is None:
        print("no certified box found")
        return EXIT_NO_TRUE_BOX
    print(f"certified box: {_format_box(found)}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quantpave",
        description=(
            "Compute tri-valued box pavings of robust feasible initial sets "
            "of discrete-time systems."
        ),
    )
    parser.add_argument("system", help="system description file (YAML)")
    parser.add_argument(
        "--mode", choices=("pave", "single"), default="pave",
        help="pave the initial box, or search for one certified box",
    )
    parser.add_argument(
        "--error", type=float, default=0.2, metavar="VOL",
        help="stop paving once the undecided volume is at most VOL",
    )
    parser.add_argument(
        "--min-width", type=float, default=2.0**-10, metavar="FRAC",
        help="bisection floor as a fraction of each root axis width",
    )
    parser.add_argument(
        "--cache-eps", type=float, default=0.25, metavar="FRAC",
        help="undecided fraction below which a cache query stops refining",
    )
    parser.add_argument(
        "--quantifier-min-width", type=float, default=2.0**-6, metavar="FRAC",
        help="subdivision floor for quantifier domains (fraction of axis width)",
    )
    parser.add_argument(
        "--unrolling", choices=("composed", "naive"), default="composed",
        help="stage-composed constraint with memo caches, or full substitution",
    )
    parser.add_argument("--csv", metavar="PATH", help="write the paving as CSV")
    parser.add_argument("--svg", metavar="PATH", help="render the paving as SVG")
    parser.add_argument("--stats", metavar="PATH", help="write run statistics as JSON")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    req = RunRequest(
        system_path=args.system,
        mode=args.mode,
        target_err=args.error,
        min_width=args.min_width,
        cache_rel_eps=args.cache_eps,
        quantifier_min_width=args.quantifier_min_width,
        unrolling=args.unrolling,
        csv_path=args.csv,
        svg_path=args.svg,
        stats_path=args.stats,
    )
    return run(req)


if __name__ == "__main__":
    sys.exit(main())
