"""Command-line interface.

Exit codes: 0 success, 1 invalid input (bad file, flag or oversized
instance), 2 infeasible instance.  Diagnostics go to standard error and
nothing is written to the output on failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from .admission import (
    check_optimality_conditions,
    compare_with_exhaustive,
    exhaustive_admission_no_relay,
    exhaustive_admission_relay,
    greedy_admission_no_relay,
    greedy_admission_relay,
)
from .allocators import allocate
from .errors import InfeasibleInstanceError, InvalidInputError, JointAllocError
from .model import check_feasibility
from .scenario import load_scenario
from .simharness import (
    ScenarioConfig,
    admission_probability,
    greedy_benchmark,
    manifest,
    run_sweep,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
WORKERS_ENV = "JOINTALLOC_WORKERS"


def parse_sweep(text: str) -> tuple[str, list[float]]:
    """``name=start:step:stop`` (stop inclusive) or ``name=v1,v2,...``."""
    if "=" not in text:
        raise InvalidInputError(f"sweep {text!r} must look like name=start:step:stop or name=v1,v2")
    name, spec = text.split("=", 1)
    name = name.strip()
    try:
        if ":" in spec:
            start, step, stop = (float(x) for x in spec.split(":"))
            if not step > 0 or stop < start:
                raise InvalidInputError(f"sweep range {spec!r} needs step > 0 and stop >= start")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = [round(start + i * step, 12) for i in range(count)]
        else:
            values = [float(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise InvalidInputError(f"sweep values in {spec!r} are not numbers") from None
    if not name or not values:
        raise InvalidInputError(f"sweep {text!r} names no parameter or no values")
    return name, values


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise InvalidInputError(f"{WORKERS_ENV}={raw!r} is not an integer") from None


def _load(path, relay: str):
    topology, gains = load_scenario(path)
    if relay == "on" and not topology.relay_mode:
        raise InvalidInputError("--relay on but the scenario has no relays")
    if relay == "off" and topology.relay_mode:
        raise InvalidInputError("--relay off but the scenario has relays")
    return topology, gains


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def cmd_allocate(args) -> int:
    topology, gains = _load(args.scenario, args.relay)
    sol = allocate(topology, gains, args.objective, args.scheme)
    alloc = sol.allocation
    report = check_feasibility(topology, alloc)
    cols = ["user", "p_s", "w_s"] + (["p_r", "w_r"] if alloc.relay_mode else []) + ["capacity"]
    rows = []
    for i, uid in enumerate(topology.user_ids):
        vals = [alloc.p_s[i], alloc.w_s[i]]
        if alloc.relay_mode:
            vals += [alloc.p_r[i], alloc.w_r[i]]
        rows.append([uid] + [float(v) for v in vals] + [float(sol.capacities[i])])
    if args.format == "json":
        doc = {
            "objective": args.objective,
            "scheme": args.scheme,
            "value": sol.value,
            "users": [dict(zip(cols, r)) for r in rows],
            "feasibility": [{"constraint": s.name, "limit": s.limit, "used": s.used, "slack": s.slack}
                            for s in report.constraints],
            "feasible": report.satisfied,
        }
        text = json.dumps(doc, indent=2) + "\n"
    elif args.format == "csv":
        lines = [",".join(cols)] + [",".join([str(r[0])] + [repr(v) for v in r[1:]]) for r in rows]
        lines += ["", "constraint,limit,used,slack"]
        lines += [f"{s.name},{s.limit!r},{s.used!r},{s.slack!r}" for s in report.constraints]
        lines += ["", f"value,{sol.value!r}"]
        text = "\n".join(lines) + "\n"
    else:
        width = 14
        lines = ["".join(c.rjust(width) for c in cols)]
        lines += ["".join([str(r[0]).rjust(width)] + [_fmt(v).rjust(width) for v in r[1:]]) for r in rows]
        label = {"sum": "total capacity", "maxmin": "worst-user capacity", "powermin": "total power"}
        lines += ["", f"{label[args.objective]}: {_fmt(sol.value)}", "", "constraint slack:"]
        lines += [f"  {s.name:<22} used {_fmt(s.used):>14} of {_fmt(s.limit):>14}" for s in report.constraints]
        lines.append(f"feasible: {'yes' if report.satisfied else 'no'}")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def _result_lines(name: str, res, trace: bool) -> list[str]:
    lines = [f"{name}: admitted {{{', '.join(map(str, res.admitted))}}} "
             f"({res.n_admitted} users), removed {res.t_star}, oracle calls {res.oracle_calls}"]
    if trace and res.removal_trace:
        lines.append(f"  {'user':>6} {'demand before':>16} {'demand after':>16}")
        for step in res.removal_trace:
            lines.append(f"  {step.user:>6} {_fmt(step.g_before):>16} {_fmt(step.g_after):>16}")
    return lines


def cmd_admit(args) -> int:
    topology, gains = _load(args.scenario, args.relay)
    relay = topology.relay_mode
    kw = {"bandwidth": args.bandwidth}
    lines = []
    greedy = exhaustive = None
    if args.algorithm in ("greedy", "both"):
        if relay:
            greedy = greedy_admission_relay(topology, gains, cap=args.cap, **kw)
        else:
            greedy = greedy_admission_no_relay(topology, gains, **kw)
    if args.algorithm in ("exhaustive", "both"):
        exhaustive = (exhaustive_admission_relay if relay else exhaustive_admission_no_relay)(
            topology, gains, cap=args.cap, **kw)
    if greedy is not None:
        lines += _result_lines("greedy", greedy, args.trace)
        if relay:
            d = greedy.details
            lines.append(f"  per-hop removals {d['t1']} and {d['t2']}, joint cap {d['d_prime']}")
    if exhaustive is not None:
        lines += _result_lines("exhaustive", exhaustive, False)
    if greedy is not None and exhaustive is not None:
        compare_with_exhaustive(greedy, exhaustive)
        if greedy.optimal_flag:
            verdict = "optimal"
        elif greedy.n_admitted == exhaustive.n_admitted:
            verdict = "suboptimal (same count, larger bandwidth demand)"
        else:
            verdict = "suboptimal (fewer users)"
        lines.append(f"greedy set is {verdict}")
        reports = [check_optimality_conditions(topology, gains, phase=ph, cap=args.cap)
                   for ph in (("source", "relay") if relay else ("direct",))]
        for ph, rep in zip(("source", "relay") if relay else ("direct",), reports):
            prefix = f"[{ph} hop] " if relay else ""
            lines.append(f"{prefix}equal thresholds: {rep.equal_thresholds}")
            lines.append(f"{prefix}at most one curve crossing per user: {rep.few_crossings}")
            lines.append(f"{prefix}remaining sets always best (C1): {rep.c1}")
            lines.append(f"{prefix}diminishing removal gains (C2): {rep.c2}")
            lines.append(f"{prefix}greedy guaranteed optimal: {rep.guaranteed}")
    _emit("\n".join(lines) + "\n", None)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{args.config}: line {exc.lineno}: {exc.msg}") from None
        config = ScenarioConfig.from_dict(doc)
        setup = doc.get("setup") if isinstance(doc, dict) else None
    else:
        config, setup = ScenarioConfig(), None
    if args.runs is not None:
        config = config.replace(runs=args.runs)
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    config.validate()
    workers = args.workers if args.workers is not None else _default_workers()
    experiment = args.experiment or ("greedy" if setup is not None else "sweep")
    out = Path(args.out)
    files: dict[str, str] = {}
    if experiment == "sweep":
        name, values = parse_sweep(args.sweep or "P_R=40")
        res = run_sweep(config, name, values, tuple(args.schemes.split(",")), args.objective, workers=workers)
        files["results.csv"] = res.table()
        files["improvement.csv"] = res.improvement_table()
        if res.failures:
            print(f"{len(res.failures)} run(s) excluded after solver failures", file=sys.stderr)
        extra = {"experiment": "sweep", "objective": args.objective, "sweep": {name: values},
                 "schemes": args.schemes.split(","), "excluded": len(res.failures)}
    elif experiment == "admission":
        name, values = parse_sweep(args.sweep or "c=0.5:0.5:3")
        if name != "c":
            raise InvalidInputError("the admission experiment sweeps the threshold c")
        rows = admission_probability(config, values, tuple(args.schemes.split(",")), workers=workers)
        files["admission.csv"] = "c,scheme,probability,n\n" + "".join(
            f"{r['c']!r},{r['scheme']},{r['probability']!r},{r['n']}\n" for r in rows)
        extra = {"experiment": "admission", "sweep": {"c": values}}
    elif experiment == "greedy":
        name, values = parse_sweep(args.sweep or "c0=0:1:6")
        if name != "c0":
            raise InvalidInputError("the greedy benchmark sweeps c0")
        res = greedy_benchmark(int(setup or 0), values, config=config, workers=workers)
        files["benchmark.csv"] = res.table()
        files["timing.csv"] = res.timing_table()
        extra = {"experiment": "greedy", "setup": setup, "sweep": {"c0": values}}
    else:
        raise InvalidInputError(f"unknown experiment {experiment!r}")
    files["manifest.json"] = json.dumps(manifest(config, **extra), indent=2, sort_keys=True) + "\n"
    out.mkdir(parents=True, exist_ok=True)
    for fname, text in files.items():
        (out / fname).write_text(text)
    print(f"wrote {', '.join(sorted(files))} to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jointalloc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("allocate", help="solve one allocation problem")
    p.add_argument("scenario")
    p.add_argument("--objective", choices=["sum", "maxmin", "powermin"], default="sum")
    p.add_argument("--relay", choices=["auto", "on", "off"], default="auto")
    p.add_argument("--scheme", choices=["obpa", "ebopa", "ebpa"], default="obpa")
    p.add_argument("--out")
    p.add_argument("--format", choices=["table", "csv", "json"], default="table")
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("admit", help="admission control on one scenario")
    p.add_argument("scenario")
    p.add_argument("--algorithm", choices=["greedy", "exhaustive", "both"], default="greedy")
    p.add_argument("--relay", choices=["auto", "on", "off"], default="auto")
    p.add_argument("--trace", action="store_true", help="print the removal trace")
    p.add_argument("--bandwidth", type=float, help="override the scenario's total bandwidth")
    p.add_argument("--cap", type=int, default=16, help="largest instance for exhaustive search")
    p.set_defaults(func=cmd_admit)

    p = sub.add_parser("simulate", help="batch experiments on random scenarios")
    p.add_argument("config", nargs="?", help="JSON configuration (defaults when omitted)")
    p.add_argument("--experiment", choices=["sweep", "admission", "greedy"])
    p.add_argument("--sweep", help="name=start:step:stop or name=v1,v2,...")
    p.add_argument("--objective", choices=["sum", "maxmin", "powermin"], default="sum")
    p.add_argument("--schemes", default="obpa,ebopa,ebpa")
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="results")
    p.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleInstanceError as exc:
        msg = f"infeasible: {exc}"
        if exc.certificate is not None:
            msg += f"\nminimum bandwidth needed: {_fmt(exc.certificate)}"
        print(msg, file=sys.stderr)
        return EXIT_INFEASIBLE
    except (JointAllocError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
