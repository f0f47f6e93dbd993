"""Command-line front end: ``mgform run | gen | oracle``.

Exit codes: 0 success, 1 infeasible plan / search budget / too many
unknowns, 2 bad input (schema, validation, flags).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from mgform import __version__
from mgform.generate import generate_scenario
from mgform.inference import SimulatedProbeExecutor, run_algorithm1
from mgform.netmodel import (
    Scenario,
    SchemaError,
    ValidationError,
    builtin_ieee37,
    dump_scenario,
    read_scenario,
    validate,
)
from mgform.oracle import TooManyUnknowns, completeness_ratio, contained, enumerate_consistent
from mgform.restoration import (
    SearchBudgetExceeded,
    dg_labels,
    evaluate,
    noop_restore,
    scf_restore,
    sts_restore,
)
from mgform.truthsim import BranchState, initial_states, snapshot_of

REPORT_SCHEMA = "mgform.run-report/1"
ORACLE_SCHEMA = "mgform.oracle-report/1"

CASES = (
    ("noop", "1. Do not pick up loads."),
    ("scf", "2. Pick up loads by the SCF method."),
    ("sts", "3. Pick up loads directly via the STS method."),
)


class UsageError(Exception):
    pass


def load(source: str) -> Scenario:
    if source == "default":
        return builtin_ieee37()
    try:
        return read_scenario(source)
    except OSError as exc:
        raise SchemaError(f"cannot read {source}: {exc.strerror}") from exc


def digest(scn: Scenario) -> str:
    return hashlib.sha256(dump_scenario(scn).encode("utf-8")).hexdigest()


def build_report(scn: Scenario, probes: bool = True, timings: bool = False) -> dict:
    net = scn.network
    labels = dg_labels(net)
    truth = initial_states(net)
    clock = {}

    t0 = time.perf_counter()
    snap = snapshot_of(net, truth)
    executor = SimulatedProbeExecutor(net, truth) if probes else None
    inf = run_algorithm1(net, snap, executor, probe_magnitude_default=scn.probe_magnitude_default)
    clock["inference_s"] = time.perf_counter() - t0

    plans = {}
    for name, _label in CASES:
        t0 = time.perf_counter()
        if name == "noop":
            plans[name] = noop_restore(net, snap)
        elif name == "scf":
            plans[name] = scf_restore(net, inf, snap)
        else:
            plans[name] = sts_restore(net, snap)
        clock[f"{name}_s"] = time.perf_counter() - t0

    cases = []
    for name, label in CASES:
        plan = plans[name]
        rep = evaluate(net, truth, plan)
        cases.append({
            "case": name,
            "label": label,
            "infeasible": plan.infeasible,
            "commands": {k: c.value for k, c in sorted(plan.commands().items())},
            "predicted": {"p": plan.predicted_served.p, "q": plan.predicted_served.q},
            "served": {"p": rep.served_p, "q": rep.served_q},
            "tripped": [labels[x] for x in rep.tripped_dgs],
            "violations": list(rep.violations),
            "search_nodes": plan.nodes,
        })

    report = {
        "schema": REPORT_SCHEMA,
        "version": __version__,
        "scenario": {
            "description": scn.description,
            "sha256": digest(scn),
            "buses": len(net.buses),
            "branches": len(net.branches),
            "dgs": {labels[x]: x for x in net.dg_buses},
        },
        "options": {"probes": probes},
        "inference": {
            "unknown_branches": len(snap.unknown_branches()),
            "resolved_closed": sorted(inf.closed()),
            "resolved_open": sorted(inf.opened()),
            "resolved_buses": {b: s.value for b, s in sorted(inf.resolved_bus.items())},
            "membership": {b: labels[x] for b, x in sorted(inf.membership.items())},
            "locked": sorted(inf.lockout_branches),
            "no_energize": sorted(inf.no_energize_buses),
            "passes": inf.passes,
            "probes": [
                {
                    "bus": r.bus,
                    "delta_p": r.delta_p,
                    "status": r.status,
                    "supplier": labels.get(r.supplier) if r.supplier else None,
                    "note": r.note,
                }
                for r in inf.probe_log
            ],
        },
        "cases": cases,
    }
    if timings:
        report["timings"] = {k: round(v, 6) for k, v in clock.items()}
    return report


def render_structured(report) -> str:
    return json.dumps(report, indent=2) + "\n"


def _pq(d) -> str:
    return f"{d['p']}+j{d['q']} kVA"


def render_table(report: dict) -> str:
    sc, inf = report["scenario"], report["inference"]
    lines = [
        f"Scenario: {sc['description']}",
        f"sha256:   {sc['sha256']}",
        "DGs:      " + ", ".join(f"{k}={v}" for k, v in sc["dgs"].items()),
        "",
        f"Inference ({inf['unknown_branches']} unknown branches, {inf['passes']} passes)",
        "  closed:      " + (", ".join(inf["resolved_closed"]) or "-"),
        "  open:        " + (", ".join(inf["resolved_open"]) or "-"),
        "  locked:      " + (", ".join(inf["locked"]) or "-"),
        "  no-energize: " + (", ".join(inf["no_energize"]) or "-"),
    ]
    for p in inf["probes"]:
        who = f" -> {p['supplier']}" if p["supplier"] else ""
        lines.append(f"  probe {p['bus']} {p['delta_p']:+d} kW: {p['status']}{who}")
    lines.append("")
    width = max(len(c["label"]) for c in report["cases"]) + 3
    lines.append(f"{'Processing case':<{width}}Total picked-up loads")
    notes = []
    for c in report["cases"]:
        extra = []
        if c["tripped"]:
            extra.append("tripped " + ", ".join(c["tripped"]))
        if c["infeasible"]:
            extra.append("infeasible")
        tail = f"   ({'; '.join(extra)})" if extra else ""
        lines.append(f"{c['label']:<{width}}{_pq(c['served'])}{tail}")
        notes.extend(f"  [{c['case']}] {v}" for v in c["violations"])
    if notes:
        lines += ["", "Violations:"] + notes
    if "timings" in report:
        lines += ["", "Timings: " + ", ".join(f"{k}={v:.3f}" for k, v in report["timings"].items())]
    return "\n".join(lines) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _run_one(args) -> dict:
    source, probes, timings = args
    return build_report(load(source), probes, timings)


def cmd_run(ns) -> int:
    jobs = [(s, not ns.no_probes, ns.timings) for s in ns.scenario]
    if ns.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
            reports = list(pool.map(_run_one, jobs))
    else:
        reports = [_run_one(j) for j in jobs]
    if ns.format == "structured":
        text = render_structured(reports[0] if len(reports) == 1 else reports)
    else:
        text = "\n".join(render_table(r) for r in reports)
    _emit(text, ns.out)
    if any(c["infeasible"] for r in reports for c in r["cases"]):
        print("error: restoration problem is infeasible", file=sys.stderr)
        return 1
    return 0


def cmd_gen(ns) -> int:
    if not 10 <= ns.buses <= 60:
        raise UsageError("--buses must be between 10 and 60")
    if not 1 <= ns.dgs <= 4:
        raise UsageError("--dgs must be between 1 and 4")
    scn = generate_scenario(ns.seed, ns.buses, ns.dgs, weighted=ns.weighted)
    assert not validate(scn.network)
    _emit(dump_scenario(scn), ns.out)
    return 0


def oracle_report(scn: Scenario, probes: bool = True, max_unknown: int = 20) -> dict:
    net = scn.network
    truth = initial_states(net)
    snap = snapshot_of(net, truth)
    executor = SimulatedProbeExecutor(net, truth) if probes else None
    inf = run_algorithm1(net, snap, executor, probe_magnitude_default=scn.probe_magnitude_default)
    cs = enumerate_consistent(net, snap, truth.shed, inf.probe_log, max_unknown=max_unknown)
    sound = contained(inf, cs)
    return {
        "schema": ORACLE_SCHEMA,
        "version": __version__,
        "scenario_sha256": digest(scn),
        "unknown_branches": list(cs.unknown),
        "consistent_assignments": len(cs.assignments),
        "forced": {k: s.value for k, s in sorted(cs.forced.items())},
        "resolved": {k: s.value for k, s in sorted(inf.resolved_branch.items())},
        "verdict": "SOUND" if sound else "UNSOUND",
        "completeness_ratio": round(completeness_ratio(inf, cs), 6),
    }


def cmd_oracle(ns) -> int:
    rep = oracle_report(load(ns.scenario), not ns.no_probes, ns.max_unknown)
    if ns.format == "structured":
        text = render_structured(rep)
    else:
        closed = sum(1 for s in rep["forced"].values() if s == BranchState.CLOSED.value)
        text = (
            f"unknown branches:       {len(rep['unknown_branches'])}\n"
            f"consistent assignments: {rep['consistent_assignments']}\n"
            f"forced:                 {len(rep['forced'])} ({closed} closed)\n"
            f"resolved by inference:  {len(rep['resolved'])}\n"
            f"verdict:                {rep['verdict']}\n"
            f"completeness ratio:     {rep['completeness_ratio']:.6f}\n"
        )
    _emit(text, ns.out)
    return 0


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mgform", description="Microgrid formation under partial observability.")
    ap.add_argument("--version", action="version", version=f"mgform {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="infer, plan the three cases and evaluate")
    run.add_argument("scenario", nargs="+", help="scenario file, or 'default' for the 37-node case")
    run.add_argument("--no-probes", action="store_true", help="disable disturbance probes")
    run.add_argument("--format", choices=("table", "structured"), default="table")
    run.add_argument("--out", metavar="PATH")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for several scenarios")
    run.add_argument("--timings", action="store_true", help="include wall-clock timings (not byte-stable)")
    run.set_defaults(func=cmd_run)

    gen = sub.add_parser("gen", help="write a random scenario")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--buses", type=int, default=20)
    gen.add_argument("--dgs", type=int, default=2)
    gen.add_argument("--weighted", action="store_true", help="draw per-bus weights from {0.5, 1, 2}")
    gen.add_argument("--out", metavar="PATH")
    gen.set_defaults(func=cmd_gen)

    orc = sub.add_parser("oracle", help="check inference against brute-force enumeration")
    orc.add_argument("scenario")
    orc.add_argument("--no-probes", action="store_true")
    orc.add_argument("--max-unknown", type=int, default=20)
    orc.add_argument("--format", choices=("table", "structured"), default="table")
    orc.add_argument("--out", metavar="PATH")
    orc.set_defaults(func=cmd_oracle)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    ns = parser.parse_args(argv)
    if getattr(ns, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")
    try:
        return ns.func(ns)
    except UsageError as exc:
        parser.error(str(exc))
    except (SchemaError, ValidationError) as exc:
        print(f"error: invalid scenario: {exc}", file=sys.stderr)
        return 2
    except (SearchBudgetExceeded, TooManyUnknowns) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
