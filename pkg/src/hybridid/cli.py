"""Command-line entry point.

    hybridid check <file>
    hybridid solve <file> [--order v1,v2,...] [--no-shortcut] [--report out.json]
                          [--plot VAR out.csv] [--when D=s ...] [--range LO HI]
    hybridid validate <file> --strategy report.json [--samples n] [--seed k]

Results go to stdout (or the ``--report`` file); diagnostics and timings go
to stderr. Exit status: 0 success, 1 model or solver failure, 2 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from typing import Sequence

import numpy as np

from hybridid.errors import (HybridIDError, PlanError, SolveError, UnsamplableError,
                             ValidationError)
from hybridid.model import InfluenceDiagram, load_diagram, plan_elimination
from hybridid.mop import MOP
from hybridid.oracle import mc_evaluate
from hybridid.policy import DecisionFunction, Strategy
from hybridid.solver import solve

GRID_POINTS = 1000


class _Fail(Exception):
    def __init__(self, code: int, lines: Sequence[str]):
        super().__init__(*lines)
        self.code = code
        self.lines = list(lines)


def _num(x: float):
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _load(path: str) -> InfluenceDiagram:
    try:
        return load_diagram(path)
    except OSError as e:
        raise _Fail(2, [f"{path}: {e.strerror or e}"]) from None
    except ValidationError as e:
        raise _Fail(1, [f"{path}: {loc}: {msg}" for loc, msg in e.problems]) from None


def _display(diagram: InfluenceDiagram, var: str | None):
    v = diagram.variables.get(var) if var else None
    return v.display if v is not None and v.display is not None else None


def render_function(diagram: InfluenceDiagram, fn: DecisionFunction) -> dict:
    out = fn.to_json()
    disp = _display(diagram, fn.variable)
    if disp is not None:
        out["display"] = {
            "variable": disp.name,
            "switch_points": [
                {"when": dict(zip(fn.parents, config)), "at": _num(disp.apply(x)),
                 "from": a, "to": b}
                for config in sorted(fn.rules) for x, a, b in fn.rules[config].switch_points()],
        }
    return out


def build_report(diagram: InfluenceDiagram, strategy: Strategy, plan) -> dict:
    return {
        "diagram": diagram.name,
        "rootValue": strategy.root_value,
        "order": list(plan.order),
        "decisions": {k: render_function(diagram, strategy.functions[k])
                      for k in sorted(strategy.functions)},
        "steps": [r.to_json() for r in strategy.diagnostics],
    }


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


def _resolve(diagram: InfluenceDiagram, name: str) -> str:
    if name in diagram.variables:
        return name
    for v in diagram.variables.values():
        if v.display is not None and v.display.name == name:
            return v.name
    raise _Fail(1, [f"--plot: unknown variable {name!r}"])


def plot_rows(diagram: InfluenceDiagram, strategy: Strategy, name: str,
              when: dict[str, str] | None = None,
              window: tuple[float, float] | None = None) -> tuple[list[str], np.ndarray]:
    """Header and rows sampling the utility curves a decision was chosen from."""
    var = _resolve(diagram, name)
    hit = [(d, c) for d, c in sorted(strategy.captures.items()) if c[0] == var]
    if not hit:
        raise _Fail(1, [f"--plot: no decision was maximized over curves in {var}"])
    decision, (_, parents, cap) = hit[0]
    when = when or {}
    configs = [c for c in sorted(cap) if all(dict(zip(parents, c)).get(k) == v
                                             for k, v in when.items())]
    if not configs:
        raise _Fail(1, [f"--plot: no configuration of {list(parents)} matches {when}"])
    multi = [c for c in configs if len(cap[c]) >= 2]
    config = (multi or configs)[0]
    curves: dict[str, MOP] = cap[config]
    alts = list(curves)
    disp = _display(diagram, var)
    to_disp = disp.apply if disp else (lambda x: x)
    if window is not None:
        lo, hi = window
        if disp is not None and disp.transform == "exp":
            lo, hi = math.log(lo), math.log(hi)
    else:
        hulls = [m.support_hull()[var] for m in curves.values() if var in m.scope]
        declared = diagram.variables[var].interval
        if not hulls:
            hulls = [declared] if declared else [(0.0, 1.0)]
        lo, hi = min(h[0] for h in hulls), max(h[1] for h in hulls)
        if declared:
            lo, hi = max(lo, declared[0]), min(hi, declared[1])
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise _Fail(1, [f"--plot: cannot grid {var} over [{lo}, {hi}]"])
    # last point just inside the half-open support
    xs = np.linspace(lo, hi, GRID_POINTS)
    xs[-1] = np.nextafter(hi, lo)
    cols = [np.array([to_disp(x) for x in xs])]
    for a in alts:
        m = curves[a]
        cols.append(m.evaluate({var: xs}) if m.scope else
                    np.full(xs.shape, m.scalar() if m.pieces else 0.0))
    header = ["x"] + (["value"] if len(alts) == 1 and alts[0] == decision else alts)
    return header, np.column_stack(cols)


def _write_csv(path: str, header: list[str], rows: np.ndarray):
    lines = [",".join(header)]
    lines += [",".join(f"{v:.17g}" for v in row) for row in rows]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def _write(path: str | None, text: str):
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise _Fail(2, [f"{path}: {e.strerror or e}"]) from None


def cmd_check(args) -> int:
    d = _load(args.file)
    try:
        plan = plan_elimination(d)
    except PlanError as e:
        raise _Fail(1, [f"{args.file}: plan: {e}"]) from None
    print(f"{args.file}: ok ({len(d.variables)} variables, order {','.join(plan.order)})",
          file=sys.stderr)
    return 0


def _when(items: Sequence[str] | None) -> dict[str, str]:
    out = {}
    for it in items or ():
        k, sep, v = it.partition("=")
        if not sep:
            raise _Fail(1, [f"--when expects NAME=STATE, got {it!r}"])
        out[k] = v
    return out


def cmd_solve(args) -> int:
    d = _load(args.file)
    order = [s.strip() for s in args.order.split(",")] if args.order else None
    t0 = time.perf_counter()
    try:
        plan = plan_elimination(d, order)
        strategy = solve(d, plan, allow_shortcut=not args.no_shortcut)
    except PlanError as e:
        raise _Fail(1, [f"{args.file}: plan: {e}"]) from None
    except SolveError as e:
        raise _Fail(1, [f"{args.file}: {e}"]) from None
    for r in strategy.diagnostics:
        print(f"step {r.index} {r.variable} ({r.kind}): fused {r.fused}, "
              f"pieces {r.pieces_in} -> {r.pieces_out}, {r.seconds:.3f}s", file=sys.stderr)
    print(f"solved in {time.perf_counter() - t0:.3f}s", file=sys.stderr)
    _write(args.report, _dumps(build_report(d, strategy, plan)))
    if args.plot:
        var, out = args.plot
        header, rows = plot_rows(d, strategy, var, _when(args.when),
                                 tuple(args.range) if args.range else None)
        try:
            _write_csv(out, header, rows)
        except OSError as e:
            raise _Fail(2, [f"{out}: {e.strerror or e}"]) from None
    return 0


def load_strategy(path: str) -> Strategy:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise _Fail(2, [f"{path}: {e.strerror or e}"]) from None
    except json.JSONDecodeError as e:
        raise _Fail(1, [f"{path}: not a report: {e}"]) from None
    try:
        functions = {k: DecisionFunction.from_json(k, v) for k, v in data["decisions"].items()}
        return Strategy(functions, float(data["rootValue"]))
    except (KeyError, TypeError, ValueError) as e:
        raise _Fail(1, [f"{path}: malformed report ({e!r})"]) from None


def cmd_validate(args) -> int:
    d = _load(args.file)
    strategy = load_strategy(args.strategy)
    missing = sorted(set(d.decisions) - set(strategy.functions))
    if missing:
        raise _Fail(1, [f"{args.strategy}: no decision function for {missing}"])
    try:
        est = mc_evaluate(d, strategy, args.samples, args.seed)
    except UnsamplableError as e:
        raise _Fail(1, [f"{args.file}: {e}"]) from None
    out = est.to_json()
    out["rootValue"] = strategy.root_value
    z = (est.mean - strategy.root_value) / est.stderr if est.stderr > 0 else (
        0.0 if est.mean == strategy.root_value else math.inf)
    out["z"] = _num(z)
    _write(None, _dumps(out))
    return 0


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybridid", description="Solve hybrid influence diagrams.")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver steps")
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("check", help="parse and validate a diagram")
    c.add_argument("file")
    c.set_defaults(run=cmd_check)
    s = sub.add_parser("solve", help="solve a diagram")
    s.add_argument("file")
    s.add_argument("--order", help="comma-separated elimination order")
    s.add_argument("--no-shortcut", action="store_true",
                   help="always divide, even when a single utility allows skipping it")
    s.add_argument("--report", help="write the JSON report here instead of stdout")
    s.add_argument("--plot", nargs=2, metavar=("VAR", "CSV"),
                   help="sample the curves a decision was maximized over")
    s.add_argument("--when", action="append", metavar="NAME=STATE",
                   help="pick the plotted configuration")
    s.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"),
                   help="plot window in displayed units")
    s.set_defaults(run=cmd_solve)
    v = sub.add_parser("validate", help="Monte Carlo check of a solved strategy")
    v.add_argument("file")
    v.add_argument("--strategy", required=True, help="report written by solve")
    v.add_argument("--samples", type=int, default=100_000)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(run=cmd_validate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(message)s")
    try:
        return args.run(args)
    except _Fail as f:
        for line in f.lines:
            print(line, file=sys.stderr)
        return f.code
    except HybridIDError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
