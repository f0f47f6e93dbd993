import json
import random
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from mgform.generate import generate_scenario
from mgform.inference import rule_flow, working_states
from mgform.pathindex import Assumption, PathExplosion, floyd_process
from mgform.truthsim import BranchState, initial_states, snapshot_of
from support import br, bus, scenario

GOLDEN = Path(__file__).parent / "golden"
C, O, U = BranchState.CLOSED, BranchState.OPEN, BranchState.UNKNOWN


def all_closed(net):
    return {k.id: O if k.faulted else C for k in net.branches}


@pytest.mark.parametrize("assume", list(Assumption))
def test_chain_single_path(assume):
    net = scenario([bus("g", dg=(9, 9)), bus("a", 1), bus("b", 1)],
                   [br("L1", "g", "a"), br("L2", "a", "b")]).network
    idx = floyd_process(net, all_closed(net), assume)
    assert idx.count["b"] == 1
    assert idx.paths[("b", "g")] == [("L2", "L1")]
    assert idx.paths[("g", "g")] == [()]


def square():
    return scenario(
        [bus("g", dg=(9, 9)), bus("a", 1), bus("c", 1), bus("b", 1)],
        [br("L1", "g", "a"), br("L2", "a", "c"), br("L3", "c", "b"), br("L4", "b", "g")],
    ).network


def test_square_opposite_corner_has_two_paths():
    net = square()
    idx = floyd_process(net, all_closed(net), Assumption.UNKNOWN_CLOSED)
    assert idx.count["c"] == 2
    assert idx.paths[("c", "g")] == [("L2", "L1"), ("L3", "L4")]


def test_unknown_edges_follow_assumption():
    net = square()
    known = {"L1": C, "L2": U, "L3": O, "L4": U}
    d = floyd_process(net, known, Assumption.UNKNOWN_OPEN)
    c = floyd_process(net, known, Assumption.UNKNOWN_CLOSED)
    assert d.count["c"] == 0 and c.count["c"] == 1
    assert c.paths[("c", "g")] == [("L2", "L1")]


def test_path_cap():
    ids = ["g", "a", "b", "c", "d", "e"]
    branches = [br(f"{x}{y}", x, y) for i, x in enumerate(ids) for y in ids[i + 1:]]
    net = scenario([bus("g", dg=(9, 9))] + [bus(x, 1) for x in ids[1:]], branches).network
    with pytest.raises(PathExplosion):
        floyd_process(net, all_closed(net), Assumption.UNKNOWN_CLOSED, cap=10)
    assert floyd_process(net, all_closed(net), Assumption.UNKNOWN_CLOSED).count["e"] == 65


def test_no_transit_through_second_dg():
    net = scenario([bus("g", dg=(9, 9)), bus("h", dg=(9, 9)), bus("a", 1)],
                   [br("L1", "g", "h"), br("L2", "h", "a")]).network
    idx = floyd_process(net, all_closed(net), Assumption.UNKNOWN_CLOSED)
    assert idx.paths[("a", "h")] == [("L2",)]
    assert ("a", "g") not in idx.paths
    assert not idx.reaches("a", "g")
    assert idx.reaches("h", "g")


def test_ieee37_probe_target_golden(ieee37):
    net = ieee37.network
    snap = snapshot_of(net, initial_states(net))
    known = working_states(net, snap)
    known.update(rule_flow(net, snap, known))
    idx = floyd_process(net, known, Assumption.UNKNOWN_CLOSED)
    gold = json.loads((GOLDEN / "ieee37_paths_732.json").read_text())
    assert idx.count[gold["bus"]] == gold["count"] >= 2
    assert [[x, list(p)] for x, p in idx.paths_from(gold["bus"])] == gold["paths"]


# -- properties ----------------------------------------------------------------

def random_known(seed, n, dgs, salt):
    net = generate_scenario(seed, n, dgs).network
    rng = random.Random(salt)
    known = {k.id: O if k.faulted else rng.choice((C, C, O, U)) for k in net.branches}
    return net, known


cases = dict(seed=st.integers(0, 5000), n=st.integers(8, 30), dgs=st.integers(1, 4), salt=st.integers(0, 999))


@given(**cases)
def test_monotone_in_assumption(seed, n, dgs, salt):
    net, known = random_known(seed, n, dgs, salt)
    d = floyd_process(net, known, Assumption.UNKNOWN_OPEN)
    c = floyd_process(net, known, Assumption.UNKNOWN_CLOSED)
    assert all(c.count[b] >= d.count[b] for b in net.bus_ids)


@given(**cases)
def test_paths_are_simple_and_agree_with_reach(seed, n, dgs, salt):
    net, known = random_known(seed, n, dgs, salt)
    for assume in Assumption:
        idx = floyd_process(net, known, assume)
        for b in net.bus_ids:
            for x in net.dg_buses:
                plist = idx.paths.get((b, x), [])
                assert idx.reaches(b, x) == (len(plist) > 0)
                assert plist == sorted(plist)
                for path in plist:
                    assert set(path) <= idx.edges
                    at, seen = b, [b]
                    for kid in path:
                        at = net.branch(kid).other(at)
                        assert at not in seen
                        seen.append(at)
                    assert at == x
                    assert not any(net.bus(v).is_dg for v in seen[:-1] if v != b)
        assert sum(idx.count.values()) == sum(len(v) for v in idx.paths.values())


@given(**cases)
def test_forest_gives_at_most_one_path(seed, n, dgs, salt):
    # a tree in which every component holds at most one DG
    net, known = random_known(seed, n, dgs, salt)
    parent = {b: b for b in net.bus_ids}

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    has_dg = {b: net.bus(b).is_dg for b in net.bus_ids}
    for k in net.branches:
        if known[k.id] is not C:
            continue
        ra, rb = find(k.from_bus), find(k.to_bus)
        if ra == rb or (has_dg[ra] and has_dg[rb]):
            known[k.id] = O
        else:
            parent[ra] = rb
            has_dg[rb] = has_dg[ra] or has_dg[rb]
    idx = floyd_process(net, known, Assumption.UNKNOWN_OPEN)
    assert set(idx.count.values()) <= {0, 1}


@given(**cases)
def test_deterministic(seed, n, dgs, salt):
    net, known = random_known(seed, n, dgs, salt)
    a = floyd_process(net, known, Assumption.UNKNOWN_CLOSED)
    b = floyd_process(net, dict(reversed(list(known.items()))), Assumption.UNKNOWN_CLOSED)
    assert a.paths == b.paths and a.count == b.count and (a.reach == b.reach).all()
