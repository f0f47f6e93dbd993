"""Builders and independent checkers shared by the test modules."""

import random

from mgform.generate import generate_scenario
from mgform.inference import SimulatedProbeExecutor, run_algorithm1
from mgform.netmodel import DG, Branch, Bus, Network, Scenario
from mgform.truthsim import energize, initial_states, served_load, snapshot_of, solve_flows


def bus(bid, p=0, q=0, dg=None, online=True, probe=True, weight=1.0):
    cap = None if dg is None else DG(*dg)
    return Bus(bid, p, q, weight=weight, dg=cap, ftu_online=online, probe_allowed=probe)


def br(kid, a, b, closed=True, switchable=True, faulted=False, ctrl=None):
    return Branch(kid, a, b, switchable=switchable, faulted=faulted, ctrl_bus=ctrl or a,
                  initial_closed=closed and not faulted)


def scenario(buses, branches, probe=100, description="test case"):
    return Scenario(Network(tuple(buses), tuple(branches)), description, probe)


def pipeline(scn, probes=True, **kw):
    net = scn.network
    truth = initial_states(net)
    snap = snapshot_of(net, truth)
    ex = SimulatedProbeExecutor(net, truth) if probes else None
    inf = run_algorithm1(net, snap, ex, probe_magnitude_default=scn.probe_magnitude_default, **kw)
    return net, truth, snap, inf, ex


def suite(count, seed0=0, buses=(15, 40), dgs=(1, 3), **kw):
    """``count`` generated scenarios with sizes drawn from the seed itself."""
    for seed in range(seed0, seed0 + count):
        r = random.Random(seed * 7919 + 1)
        yield seed, generate_scenario(seed, r.randint(*buses), r.randint(*dgs), **kw)


def balance_errors(net, st, el=None, fs=None):
    """Per-bus conservation residuals (should be empty), computed from scratch."""
    el = el or energize(net, st)
    fs = fs or solve_flows(net, st, el)
    errors = []
    for k in net.branches:
        a, b = fs.branch_flow[(k.id, k.from_bus)], fs.branch_flow[(k.id, k.to_bus)]
        if a.p != -b.p or a.q != -b.q:
            errors.append(("lossless", k.id))
        if not st.is_closed(net, k.id) and (a.p or a.q):
            errors.append(("open-carries", k.id))
    for b in net.buses:
        inj_p = sum(fs.branch_flow[(kid, b.id)].p for kid in net.incidence[b.id])
        inj_q = sum(fs.branch_flow[(kid, b.id)].q for kid in net.incidence[b.id])
        if b.is_dg:
            inj_p += fs.dg_output[b.id].p
            inj_q += fs.dg_output[b.id].q
        load = served_load(net, st, el, b.id)
        if (inj_p, inj_q) != (load.p, load.q):
            errors.append(("balance", b.id))
    for ci, live in el.energized.items():
        if live:
            dg = el.root_dg[ci]
            members = [x for x, c in el.component.items() if c == ci]
            tot = sum(served_load(net, st, el, x).p for x in members)
            if fs.dg_output[dg].p != tot:
                errors.append(("dg-total", dg))
    return errors


def probe_algebra_ok(res):
    drops = {x: res.dg_before[x] - res.dg_after[x] for x in res.dg_before}
    moved = [x for x, d in drops.items() if d != 0]
    return sum(drops.values()) == -res.delta_p and len(moved) <= 1
