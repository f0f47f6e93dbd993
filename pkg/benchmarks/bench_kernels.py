"""Compare the numba kernels with the fallback selected by ``MGFORM_NO_NUMBA=1``.

    python benchmarks/bench_kernels.py [--repeat N] [--suite N] [--json PATH]

The same measurements run in two worker processes, one per mode, so the
fallback is exactly what the package uses when numba is switched off:
interpreted kernels plus the vectorised numpy closure. Each kernel gets a
warm-up call first, so jit compilation is excluded; the process row times
a whole ``mgform oracle default`` run including interpreter start-up and
numba's cache loading. Finally the mean oracle completeness ratio is
reported over a random suite with at most 12 unknown branches.
"""

import argparse
import json
import math
import os
import subprocess
import sys
import time

import numpy as np


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def pipeline(scn):
    from mgform.inference import SimulatedProbeExecutor, run_algorithm1
    from mgform.truthsim import initial_states, snapshot_of

    net = scn.network
    truth = initial_states(net)
    snap = snapshot_of(net, truth)
    inf = run_algorithm1(net, snap, SimulatedProbeExecutor(net, truth),
                         probe_magnitude_default=scn.probe_magnitude_default)
    return net, truth, snap, inf


def measure(repeat):
    from mgform import _kernels
    from mgform.generate import generate_scenario
    from mgform.netmodel import builtin_ieee37
    from mgform.oracle import kernel_inputs, unknown_branches
    from mgform.restoration import build_model, scf_restore

    rows = {}
    rng = np.random.default_rng(0)
    for n in (37, 120, 300):
        adj = rng.random((n, n)) < 2.0 / n
        adj |= adj.T
        rows[f"closure n={n}"] = best_of(lambda: _kernels.floyd_closure(adj), repeat)

    net, truth, snap, inf = pipeline(builtin_ieee37())
    unk = unknown_branches(net, snap)
    args = kernel_inputs(net, snap, unk, truth.shed, inf.probe_log)
    rows[f"consistency 37-node, 2^{len(unk)} masks"] = best_of(lambda: _kernels.consistent_masks(*args), repeat)

    seed = 0
    while True:
        gnet, _, gsnap, ginf = pipeline(generate_scenario(seed, 30, 3, weighted=True))
        m = build_model(gnet, ginf, gsnap)
        if m.n_free >= 12:
            break
        seed += 1
    margs = (len(m.blocks), m.blk_nodes, m.blk_edges, m.blk_dgs, m.blk_bad, m.blk_p, m.blk_q, m.blk_val,
             m.blk_cap_p, m.blk_cap_q, m.fsrc, m.fdst)
    rows[f"switch enumeration, 2^{m.n_free} masks"] = best_of(
        lambda: _kernels.enumerate_switch_masks(*margs), max(1, repeat // 5))
    rows["scf_restore 37-node (branch and bound)"] = best_of(lambda: scf_restore(net, inf, snap), repeat)
    return rows


def worker_env(fallback):
    env = dict(os.environ)
    env.pop("MGFORM_NO_NUMBA", None)
    if fallback:
        env["MGFORM_NO_NUMBA"] = "1"
    return env


def run_worker(fallback, repeat):
    proc = subprocess.run(
        [sys.executable, __file__, "--worker", "--repeat", str(repeat)],
        env=worker_env(fallback), capture_output=True, text=True, check=True,
    )
    rows = json.loads(proc.stdout)
    cmd = [sys.executable, "-m", "mgform", "oracle", "default"]
    subprocess.run(cmd, env=worker_env(fallback), capture_output=True, check=True)
    t0 = time.perf_counter()
    subprocess.run(cmd, env=worker_env(fallback), capture_output=True, check=True)
    rows["mgform oracle default (whole process)"] = time.perf_counter() - t0
    return rows


def completeness(count):
    from mgform.generate import generate_scenario
    from mgform.oracle import completeness_ratio, enumerate_consistent

    ratios = []
    for seed in range(count):
        net, truth, snap, inf = pipeline(generate_scenario(seed, 15 + seed % 26, 1 + seed % 3, max_unknown=12))
        ratios.append(completeness_ratio(inf, enumerate_consistent(net, snap, truth.shed, inf.probe_log)))
    return math.fsum(ratios) / len(ratios)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--suite", type=int, default=200, help="scenarios for the completeness ratio")
    ap.add_argument("--json", metavar="PATH")
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        print(json.dumps(measure(args.repeat)))
        return

    fast = run_worker(False, args.repeat)
    slow = run_worker(True, args.repeat)
    width = max(len(k) for k in fast)
    print(f"{'measurement':<{width}}  {'numba s':>10}  {'fallback s':>10}  {'speed-up':>8}")
    for key in fast:
        print(f"{key:<{width}}  {fast[key]:>10.5f}  {slow[key]:>10.5f}  {slow[key] / fast[key]:>7.1f}x")
    mean = completeness(args.suite)
    print(f"\nmean completeness ratio over {args.suite} scenarios (<= 12 unknown branches): {mean:.4f}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"numba": fast, "fallback": slow, "completeness_ratio": mean, "suite": args.suite},
                      fh, indent=2)
            fh.write("\n")


if __name__ == "__main__":
    main()
