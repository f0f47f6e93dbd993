import dataclasses
import itertools
import json
import math
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from mgform.generate import generate_scenario
from mgform.restoration import (
    SearchBudgetExceeded,
    SwitchCmd,
    apply_plan,
    build_model,
    dg_labels,
    evaluate,
    exhaustive_optimum,
    noop_restore,
    scf_restore,
    served_totals,
    solve_model,
    sts_restore,
)
from mgform.truthsim import TruthError, components, energize, initial_states, snapshot_of
from support import br, bus, pipeline, scenario

GOLDEN = json.loads((Path(__file__).parent / "golden" / "ieee37_served.json").read_text())


def chain_case(cap):
    return scenario(
        [bus("g", dg=(cap, cap)), bus("a", 300, 0), bus("b", 400, 0)],
        [br("L1", "g", "a", switchable=False), br("S", "a", "b", closed=False)],
    )


@pytest.mark.parametrize("cap,served,cmd", [(500, 300, SwitchCmd.OPEN), (750, 700, SwitchCmd.CLOSE)])
def test_chain_capacity(cap, served, cmd):
    net, truth, s, inf, _ = pipeline(chain_case(cap))
    plan = scf_restore(net, inf, s)
    assert plan.switch_cmd["S"] is cmd
    assert plan.predicted_served.p == served
    rep = evaluate(net, truth, plan)
    assert rep.served_p == served and rep.violations == [] and rep.tripped_dgs == []


def test_everything_locked():
    scn = scenario(
        [bus("g", dg=(900, 900), online=False), bus("a", 10), bus("b", 10)],
        [br("L1", "g", "a", closed=False, ctrl="g"), br("L2", "g", "b", closed=False, ctrl="g")],
    )
    net, truth, s, inf, _ = pipeline(scn)
    assert inf.lockout_branches == {"L1", "L2"}
    plan = scf_restore(net, inf, s)
    assert plan.commands() == {}
    assert plan.predicted_served.p == 0


def test_infeasible_is_flagged():
    scn = scenario([bus("g", dg=(50, 50)), bus("a", 100)], [br("L1", "g", "a", switchable=False)])
    net, truth, s, inf, _ = pipeline(scn)
    plan = scf_restore(net, inf, s)
    assert plan.infeasible and plan.commands() == {} and plan.pickup == frozenset()


def test_node_cap(ieee37):
    net, truth, s, inf, _ = pipeline(ieee37)
    with pytest.raises(SearchBudgetExceeded):
        scf_restore(net, inf, s, node_cap=5)


def test_sts_matches_scf_when_nothing_binds():
    scn = scenario(
        [bus("g", dg=(9999, 9999)), bus("a", 10), bus("b", 20), bus("c", 30)],
        [br("L1", "g", "a"), br("L2", "a", "b", closed=False), br("L3", "b", "c", closed=False),
         br("T", "c", "g", closed=False)],
    )
    net, truth, s, inf, _ = pipeline(scn)
    sts = evaluate(net, truth, sts_restore(net, s))
    scf = evaluate(net, truth, scf_restore(net, inf, s))
    assert sts.served_p == scf.served_p == 60
    assert sts.violations == scf.violations == []


def test_sts_without_dgs_is_empty():
    scn = scenario([bus("a", 10), bus("b", 20)], [br("L1", "a", "b")])
    net = scn.network
    plan = sts_restore(net, snapshot_of(net, initial_states(net)))
    assert plan.pickup == frozenset() and plan.predicted_served.p == 0


def test_noop_extremes():
    scn = scenario([bus("g", 5, 1, dg=(900, 900)), bus("a", 10, 2), bus("b", 20, 3)],
                   [br("L1", "g", "a"), br("L2", "a", "b")])
    net = scn.network
    truth = initial_states(net)
    assert evaluate(net, truth, noop_restore(net, snapshot_of(net, truth))).served_p == 35
    dark = dataclasses.replace(truth, tripped=frozenset({"g"}))
    assert evaluate(net, dark, noop_restore(net, snapshot_of(net, dark))).served_p == 0


def test_locked_commands_are_dropped_and_reported(ieee37):
    net, truth, s, inf, _ = pipeline(ieee37)
    plan = scf_restore(net, inf, s)
    bad = dataclasses.replace(plan, switch_cmd={**plan.switch_cmd, "TS3": SwitchCmd.CLOSE})
    st_, violations = apply_plan(net, truth, bad)
    assert violations == ["locked branch commanded: TS3"]
    assert st_.closed["TS3"] is False


def test_dg_labels(ieee37):
    assert dg_labels(ieee37.network) == {"701": "DG1", "704": "DG2", "775": "DG3"}


def test_default_three_cases(ieee37):
    net, truth, s, inf, _ = pipeline(ieee37)
    noop = evaluate(net, truth, noop_restore(net, s))
    scf = evaluate(net, truth, scf_restore(net, inf, s))
    sts = evaluate(net, truth, sts_restore(net, s))
    assert (noop.served_p, noop.served_q) == tuple(GOLDEN["noop"]) == tuple(served_totals(net, truth))
    assert (scf.served_p, scf.served_q) == tuple(GOLDEN["scf"])
    assert (sts.served_p, sts.served_q) == tuple(GOLDEN["sts"])
    assert noop.violations == [] and noop.tripped_dgs == []
    assert scf.violations == [] and scf.tripped_dgs == []
    labels = dg_labels(net)
    assert [labels[x] for x in sts.tripped_dgs] == ["DG2", "DG3"]
    assert scf.served_p > noop.served_p > sts.served_p


def test_default_plan_respects_inference(ieee37):
    net, truth, s, inf, _ = pipeline(ieee37)
    plan = scf_restore(net, inf, s)
    assert all(plan.switch_cmd[k] is SwitchCmd.NO_ACTION for k in inf.lockout_branches)
    assert not plan.pickup & inf.no_energize_buses


# -- exactness -------------------------------------------------------------------

def brute_force_truth(net, truth, inf, plan_free):
    """Best weighted pickup over all settings of ``plan_free``, judged by truthsim."""
    best = None
    for bits in itertools.product((False, True), repeat=len(plan_free)):
        st_ = truth.with_closed(dict(zip(plan_free, bits)))
        try:
            el = energize(net, st_)
        except TruthError:
            continue
        ok = True
        for comp in components(net, st_):
            if not comp.dgs:
                continue
            cap = net.bus(comp.dgs[0]).dg
            if sum(net.bus(b).load_p for b in comp.buses) > cap.cap_p:
                ok = False
            if sum(net.bus(b).load_q for b in comp.buses) > cap.cap_q:
                ok = False
        if not ok or any(el.is_energized(b) for b in inf.no_energize_buses):
            continue
        val = math.fsum(net.bus(b).weight * net.bus(b).load_p for b in net.bus_ids if el.is_energized(b))
        best = val if best is None else max(best, val)
    return best


sizes = dict(seed=st.integers(0, 100_000), n=st.integers(8, 22), dgs=st.integers(1, 3))


@given(**sizes)
def test_branch_and_bound_equals_enumeration(seed, n, dgs):
    net, truth, s, inf, _ = pipeline(generate_scenario(seed, n, dgs, weighted=True))
    model = build_model(net, inf, s)
    if model.n_free > 14:
        return
    best, choice, _ = solve_model(model)
    exact, _ = exhaustive_optimum(model)
    assert best == exact


@given(**sizes)
def test_objective_matches_truth_route_when_fully_known(seed, n, dgs):
    net, truth, s, inf, _ = pipeline(generate_scenario(seed, n, dgs, weighted=True, offline_rate=0.1))
    model = build_model(net, inf, s)
    if model.frozen or model.n_free > 12:
        return
    plan = scf_restore(net, inf, s)
    assert plan.objective == brute_force_truth(net, truth, inf, model.free)


@given(**sizes)
def test_scf_plans_are_feasible_and_dominate(seed, n, dgs):
    net, truth, s, inf, _ = pipeline(generate_scenario(seed, n, dgs))
    plan = scf_restore(net, inf, s)
    rep = evaluate(net, truth, plan)
    assert rep.violations == [] and rep.tripped_dgs == []
    st_, _ = apply_plan(net, truth, plan)
    energize(net, st_)  # radial, one DG per island, or this raises
    for comp in components(net, st_):
        assert len(comp.dgs) <= 1 and not (comp.dgs and comp.cyclic)
    assert rep.served_p >= evaluate(net, truth, noop_restore(net, s)).served_p
    assert all(plan.switch_cmd[k] is SwitchCmd.NO_ACTION for k in inf.lockout_branches)
    assert not plan.pickup & inf.no_energize_buses
