"""Microgrid-formation restoration plans and their evaluation against ground truth.

``scf_restore`` solves the single-commodity-flow microgrid formation problem
exactly by branch and bound over the free switch variables. The SCF
constraints (each picked-up bus consumes one unit of commodity shipped from
a DG along closed branches, closed branches = buses - 1 per island) are
equivalent to "every energized island is a tree holding exactly one DG",
which is what the search checks directly on a union-find over contracted
blocks of fixed-closed branches.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping

import numpy as np

from mgform import _kernels
from mgform.inference import InferenceResult
from mgform.netmodel import Network
from mgform.truthsim import (
    PQ,
    ActualStates,
    BranchState,
    BusState,
    TelemetrySnapshot,
    components,
    energize,
    served_load,
    trip_overloads,
)

DEFAULT_NODE_CAP = 10**7


class SwitchCmd(str, Enum):
    CLOSE = "close"
    OPEN = "open"
    NO_ACTION = "no_action"


class SearchBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class RestorationPlan:
    switch_cmd: dict[str, SwitchCmd]
    pickup: frozenset
    predicted_microgrid: dict[str, str]
    predicted_served: PQ
    locked: frozenset = frozenset()
    no_energize: frozenset = frozenset()
    method: str = ""
    infeasible: bool = False
    objective: float = 0.0
    nodes: int = 0

    def commands(self) -> dict[str, SwitchCmd]:
        return {k: c for k, c in self.switch_cmd.items() if c is not SwitchCmd.NO_ACTION}


@dataclass(frozen=True)
class ServedReport:
    served_p: int
    served_q: int
    tripped_dgs: list[str]
    violations: list[str]
    energized: frozenset = frozenset()


def dg_labels(net: Network) -> dict[str, str]:
    """``DG1``, ``DG2``, ... in bus document order."""
    return {x: f"DG{i}" for i, x in enumerate(net.dg_buses, start=1)}


# -- planning model -------------------------------------------------------------

class _DSU:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb
        return ra != rb


@dataclass
class PlanModel:
    """Restoration problem reduced to blocks joined by free switches.

    A block is a maximal set of buses tied together by branches whose state
    the planner cannot or may not change. Buses in ``frozen`` sit in islands
    touched by still-unknown branches and are left exactly as they are.
    """

    blocks: list[tuple[str, ...]]
    blk_nodes: np.ndarray
    blk_edges: np.ndarray
    blk_dgs: np.ndarray
    blk_dg_bus: list[str | None]
    blk_bad: np.ndarray
    blk_p: np.ndarray
    blk_q: np.ndarray
    blk_val: np.ndarray
    blk_cap_p: np.ndarray
    blk_cap_q: np.ndarray
    free: list[str]
    fsrc: np.ndarray
    fdst: np.ndarray
    current: np.ndarray
    frozen: frozenset
    frozen_live: frozenset
    deduced_open: frozenset
    known: dict[str, BranchState] = field(repr=False)

    @property
    def n_free(self) -> int:
        return len(self.free)


def _known_energization(net, snapshot, inf, groups: _DSU):
    """Per known-closed group: the DG inside it, and whether it is known live/dead."""
    dg_of: dict[str, str] = {}
    live: set[str] = set()
    dead: set[str] = set()
    for b in net.bus_ids:
        r = groups.find(b)
        state = snapshot.bus_state[b]
        if state is BusState.UNKNOWN:
            state = inf.resolved_bus.get(b, BusState.UNKNOWN)
        if net.bus(b).is_dg:
            dg_of[r] = b
            live.add(r)
        if state is BusState.ELECTRIFIED:
            live.add(r)
        elif state is BusState.UNPOWERED:
            dead.add(r)
    return dg_of, live, dead


def build_model(net: Network, inf: InferenceResult, snapshot: TelemetrySnapshot) -> PlanModel:
    known = dict(inf.known_branch)
    closed_groups = _DSU(net.bus_ids)
    for kid, s in known.items():
        if s is BranchState.CLOSED:
            k = net.branch(kid)
            closed_groups.union(k.from_bus, k.to_bus)
    dg_of, live, dead = _known_energization(net, snapshot, inf, closed_groups)

    # Radial single-DG ground truth pins some unknown branches open; the
    # planner may rely on that even though inference does not report it.
    deduced = set()
    for kid, s in known.items():
        if s is not BranchState.UNKNOWN:
            continue
        k = net.branch(kid)
        ra, rb = closed_groups.find(k.from_bus), closed_groups.find(k.to_bus)
        two_dgs = ra in dg_of and rb in dg_of and dg_of[ra] != dg_of[rb]
        live_dead = (ra in live and rb in dead) or (rb in live and ra in dead)
        if two_dgs or live_dead:
            deduced.add(kid)
    plan_state = dict(known)
    for kid in deduced:
        plan_state[kid] = BranchState.OPEN

    uncertain = [kid for kid, s in plan_state.items() if s is BranchState.UNKNOWN]
    c_groups = _DSU(net.bus_ids)
    for kid, s in plan_state.items():
        if s is not BranchState.OPEN:
            k = net.branch(kid)
            c_groups.union(k.from_bus, k.to_bus)
    hot_roots = {c_groups.find(net.branch(kid).from_bus) for kid in uncertain}
    frozen = frozenset(b for b in net.bus_ids if c_groups.find(b) in hot_roots)
    frozen_live = frozenset(b for b in frozen if closed_groups.find(b) in live)

    free = []
    for k in net.branches:
        if (
            k.switchable
            and not k.faulted
            and net.controllable(k.id)
            and k.id not in inf.lockout_branches
            and plan_state[k.id] is not BranchState.UNKNOWN
            and k.from_bus not in frozen
            and k.to_bus not in frozen
        ):
            free.append(k.id)
    free_set = set(free)

    work = [b for b in net.bus_ids if b not in frozen]
    blocks_dsu = _DSU(work)
    fixed_closed = [
        kid for kid, s in plan_state.items()
        if s is BranchState.CLOSED and kid not in free_set
        and net.branch(kid).from_bus not in frozen
    ]
    for kid in fixed_closed:
        k = net.branch(kid)
        blocks_dsu.union(k.from_bus, k.to_bus)
    order: dict[str, int] = {}
    blocks: list[list[str]] = []
    for b in work:
        r = blocks_dsu.find(b)
        if r not in order:
            order[r] = len(blocks)
            blocks.append([])
        blocks[order[r]].append(b)
    blk_of = {b: order[blocks_dsu.find(b)] for b in work}
    nb = len(blocks)
    edges = np.zeros(nb, dtype=np.int64)
    for kid in fixed_closed:
        edges[blk_of[net.branch(kid).from_bus]] += 1

    nodes = np.array([len(bl) for bl in blocks], dtype=np.int64)
    dgs = np.zeros(nb, dtype=np.int64)
    bad = np.zeros(nb, dtype=np.int64)
    p = np.zeros(nb, dtype=np.int64)
    q = np.zeros(nb, dtype=np.int64)
    val = np.zeros(nb, dtype=np.float64)
    cap_p = np.zeros(nb, dtype=np.int64)
    cap_q = np.zeros(nb, dtype=np.int64)
    dg_bus: list[str | None] = [None] * nb
    for i, bl in enumerate(blocks):
        vals = []
        for b in bl:
            bus = net.bus(b)
            p[i] += bus.load_p
            q[i] += bus.load_q
            vals.append(bus.weight * bus.load_p)
            if b in inf.no_energize_buses:
                bad[i] += 1
            if bus.dg is not None:
                dgs[i] += 1
                cap_p[i] += bus.dg.cap_p
                cap_q[i] += bus.dg.cap_q
                dg_bus[i] = b
        val[i] = math.fsum(vals)

    fsrc = np.array([blk_of[net.branch(k).from_bus] for k in free], dtype=np.int64)
    fdst = np.array([blk_of[net.branch(k).to_bus] for k in free], dtype=np.int64)
    current = np.array([known[k] is BranchState.CLOSED for k in free], dtype=np.bool_)
    return PlanModel(
        [tuple(bl) for bl in blocks], nodes, edges, dgs, dg_bus, bad, p, q, val, cap_p, cap_q,
        free, fsrc, fdst, current, frozen, frozen_live, frozenset(deduced), known,
    )


# -- exact search -----------------------------------------------------------------

class _Search:
    """Depth-first branch and bound with an undoable union-find."""

    def __init__(self, model: PlanModel, order: list[int], node_cap: int):
        self.m = model
        self.order = order
        self.node_cap = node_cap
        nb = len(model.blocks)
        self.parent = list(range(nb))
        self.size = [1] * nb
        self.nodes = model.blk_nodes.tolist()
        self.edges = model.blk_edges.tolist()
        self.dgs = model.blk_dgs.tolist()
        self.bad = model.blk_bad.tolist()
        self.p = model.blk_p.tolist()
        self.q = model.blk_q.tolist()
        self.cp = model.blk_cap_p.tolist()
        self.cq = model.blk_cap_q.tolist()
        self.val = model.blk_val.tolist()
        self.undo: list[tuple] = []
        self.choice = [False] * model.n_free
        self.best = -math.inf
        self.best_choice: list[bool] | None = None
        self.visited = 0

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            x = self.parent[x]
        return x

    def _ok(self, r: int) -> bool:
        if self.dgs[r] == 0:
            return True
        return (
            self.dgs[r] == 1
            and self.bad[r] == 0
            and self.edges[r] == self.nodes[r] - 1
            and self.p[r] <= self.cp[r]
            and self.q[r] <= self.cq[r]
        )

    def close(self, j: int) -> bool:
        """Close free switch j; False if that makes a live island infeasible."""
        a, b = self.find(int(self.m.fsrc[j])), self.find(int(self.m.fdst[j]))
        if a == b:
            self.edges[a] += 1
            self.undo.append(("edge", a))
            return self._ok(a)
        if self.size[a] > self.size[b]:
            a, b = b, a
        self.undo.append(("merge", a, b))
        self.parent[a] = b
        self.size[b] += self.size[a]
        for arr in (self.nodes, self.edges, self.dgs, self.bad, self.p, self.q, self.cp, self.cq, self.val):
            arr[b] += arr[a]
        self.edges[b] += 1
        return self._ok(b)

    def rollback(self) -> None:
        rec = self.undo.pop()
        if rec[0] == "edge":
            self.edges[rec[1]] -= 1
            return
        _, a, b = rec
        self.edges[b] -= 1
        for arr in (self.nodes, self.edges, self.dgs, self.bad, self.p, self.q, self.cp, self.cq, self.val):
            arr[b] -= arr[a]
        self.size[b] -= self.size[a]
        self.parent[a] = a

    def value(self) -> float:
        return math.fsum(
            self.m.blk_val[i] for i in range(len(self.parent)) if self.dgs[self.find(i)] > 0
        )

    def bound(self, depth: int) -> float:
        """Live value now plus every block still linkable to a live island."""
        nb = len(self.parent)
        root = [self.find(i) for i in range(nb)]
        adj: dict[int, list[int]] = {}
        for pos in range(depth, len(self.order)):
            j = self.order[pos]
            a, b = root[int(self.m.fsrc[j])], root[int(self.m.fdst[j])]
            if a != b:
                adj.setdefault(a, []).append(b)
                adj.setdefault(b, []).append(a)
        live = {r for r in set(root) if self.dgs[r] > 0}
        seen = set(live)
        queue = deque(live)
        while queue:
            u = queue.popleft()
            for v in adj.get(u, ()):
                if v not in seen and self.bad[v] == 0 and self.dgs[v] == 0:
                    seen.add(v)
                    queue.append(v)
        return math.fsum(self.val[r] for r in seen)

    def run(self) -> None:
        if all(self._ok(i) for i in range(len(self.parent))):
            self._visit(0)

    def _visit(self, depth: int) -> None:
        self.visited += 1
        if self.visited > self.node_cap:
            raise SearchBudgetExceeded(f"branch and bound exceeded {self.node_cap} nodes")
        if depth == len(self.order):
            v = self.value()
            if v > self.best:
                self.best = v
                self.best_choice = list(self.choice)
            return
        if self.bound(depth) <= self.best:
            return
        j = self.order[depth]
        first = bool(self.m.current[j])
        for closed in (first, not first):
            self.choice[j] = closed
            if closed:
                if self.close(j):
                    self._visit(depth + 1)
                self.rollback()
            else:
                self._visit(depth + 1)
        self.choice[j] = False


def _variable_order(model: PlanModel) -> list[int]:
    """Free switches by block distance from the nearest DG, then branch id."""
    nb = len(model.blocks)
    adj: dict[int, list[int]] = {i: [] for i in range(nb)}
    for j in range(model.n_free):
        a, b = int(model.fsrc[j]), int(model.fdst[j])
        adj[a].append(b)
        adj[b].append(a)
    dist = {i: 0 for i in range(nb) if model.blk_dgs[i] > 0}
    queue = deque(sorted(dist))
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    far = nb + 1

    def key(j: int):
        d = min(dist.get(int(model.fsrc[j]), far), dist.get(int(model.fdst[j]), far))
        return (d, model.free[j])

    return sorted(range(model.n_free), key=key)


def solve_model(model: PlanModel, node_cap: int = DEFAULT_NODE_CAP) -> tuple[float, list[bool] | None, int]:
    """Optimal objective and switch setting (None when nothing is feasible)."""
    search = _Search(model, _variable_order(model), node_cap)
    search.run()
    return search.best, search.best_choice, search.visited


def exhaustive_optimum(model: PlanModel) -> tuple[float, int]:
    """Brute-force optimum over all 2^n free switch settings."""
    best, mask, _n = _kernels.enumerate_switch_masks(
        len(model.blocks), model.blk_nodes, model.blk_edges, model.blk_dgs, model.blk_bad,
        model.blk_p, model.blk_q, model.blk_val, model.blk_cap_p, model.blk_cap_q,
        model.fsrc, model.fdst,
    )
    return float(best) if mask >= 0 else -math.inf, int(mask)


def _islands(model: PlanModel, choice: list[bool]):
    dsu = _DSU(range(len(model.blocks)))
    for j, c in enumerate(choice):
        if c:
            dsu.union(int(model.fsrc[j]), int(model.fdst[j]))
    members: dict[int, list[int]] = {}
    for i in range(len(model.blocks)):
        members.setdefault(dsu.find(i), []).append(i)
    return list(members.values())


def scf_restore(
    net: Network,
    inf: InferenceResult,
    snapshot: TelemetrySnapshot,
    node_cap: int = DEFAULT_NODE_CAP,
) -> RestorationPlan:
    """Exact maximum weighted pickup under radiality, capacity and lockouts."""
    model = build_model(net, inf, snapshot)
    best, choice, visited = solve_model(model, node_cap)
    if choice is None:
        return RestorationPlan(
            {k.id: SwitchCmd.NO_ACTION for k in net.branches}, frozenset(), {}, PQ(0, 0),
            inf.lockout_branches, inf.no_energize_buses, "scf", True, 0.0, visited,
        )
    cmd = {k.id: SwitchCmd.NO_ACTION for k in net.branches}
    for j, kid in enumerate(model.free):
        cmd[kid] = SwitchCmd.CLOSE if choice[j] else SwitchCmd.OPEN
    pickup: set[str] = set()
    mg: dict[str, str] = {}
    for island in _islands(model, choice):
        dg = next((model.blk_dg_bus[i] for i in island if model.blk_dgs[i] > 0), None)
        if dg is None:
            continue
        for i in island:
            for b in model.blocks[i]:
                pickup.add(b)
                mg[b] = dg
    pickup |= model.frozen_live
    sp = sum(net.bus(b).load_p for b in pickup)
    sq = sum(net.bus(b).load_q for b in pickup)
    return RestorationPlan(
        cmd, frozenset(pickup), mg, PQ(sp, sq),
        inf.lockout_branches, inf.no_energize_buses, "scf", False, best, visited,
    )


def sts_restore(net: Network, snapshot: TelemetrySnapshot) -> RestorationPlan:
    """Spanning-tree-search baseline: grow BFS trees from every DG at once.

    Unknown branches are treated as usable, every tree branch is closed and
    every other switch opened, with no capacity check.
    """
    owner: dict[str, str] = {}
    tree: set[str] = set()
    frontier = []
    for x in net.dg_buses:
        owner[x] = x
        frontier.append(x)
    while frontier:
        nxt = []
        for u in frontier:
            for kid, v in net.neighbors(u):
                if net.branch(kid).faulted or v in owner:
                    continue
                owner[v] = owner[u]
                tree.add(kid)
                nxt.append(v)
        frontier = nxt
    cmd = {}
    for k in net.branches:
        if not k.switchable:
            cmd[k.id] = SwitchCmd.NO_ACTION
        else:
            cmd[k.id] = SwitchCmd.CLOSE if k.id in tree else SwitchCmd.OPEN
    sp = sum(net.bus(b).load_p for b in owner)
    sq = sum(net.bus(b).load_q for b in owner)
    return RestorationPlan(cmd, frozenset(owner), dict(owner), PQ(sp, sq), method="sts")


def noop_restore(net: Network | None = None, snapshot: TelemetrySnapshot | None = None) -> RestorationPlan:
    """Leave every switch alone; only what is already live stays served."""
    if net is None:
        return RestorationPlan({}, frozenset(), {}, PQ(0, 0), method="noop")
    live = frozenset(b for b, s in snapshot.bus_state.items() if s is BusState.ELECTRIFIED)
    sp = sum(net.bus(b).load_p for b in live)
    sq = sum(net.bus(b).load_q for b in live)
    return RestorationPlan(
        {k.id: SwitchCmd.NO_ACTION for k in net.branches}, live, {}, PQ(sp, sq), method="noop",
    )


# -- evaluation -------------------------------------------------------------------

def apply_plan(net: Network, truth: ActualStates, plan: RestorationPlan) -> tuple[ActualStates, list[str]]:
    """Execute the commands the OC can actually deliver; report the rest."""
    violations = []
    closed = dict(truth.closed)
    for kid, cmd in sorted(plan.switch_cmd.items()):
        if cmd is SwitchCmd.NO_ACTION:
            continue
        k = net.branch(kid)
        if kid in plan.locked:
            violations.append(f"locked branch commanded: {kid}")
        elif not net.controllable(kid):
            violations.append(f"unknown branch commanded: {kid}")
        elif not k.switchable:
            violations.append(f"non-switchable branch commanded: {kid}")
        else:
            closed[kid] = cmd is SwitchCmd.CLOSE
    return replace(truth, closed=closed), violations


def evaluate(net: Network, ground_truth: ActualStates, plan: RestorationPlan) -> ServedReport:
    st, violations = apply_plan(net, ground_truth, plan)
    before = energize(net, ground_truth)
    protection: list[str] = []
    for comp in components(net, st):
        if not comp.dgs:
            continue
        if len(comp.dgs) > 1:
            violations.append(f"several DGs in one island: {', '.join(comp.dgs)}")
        elif comp.cyclic:
            violations.append(f"cycle formed in island of {comp.dgs[0]}")
        else:
            continue
        protection.extend(comp.dgs)
    if protection:
        st = replace(st, tripped=st.tripped | frozenset(protection))
    st, overload = trip_overloads(net, st)
    el = energize(net, st)
    for b in sorted(plan.no_energize):
        if el.is_energized(b) and not before.is_energized(b):
            violations.append(f"no-energize bus energized: {b}")
    sp = sq = 0
    live = []
    for b in net.bus_ids:
        pq = served_load(net, st, el, b)
        sp += pq.p
        sq += pq.q
        if el.is_energized(b):
            live.append(b)
    return ServedReport(sp, sq, protection + overload, violations, frozenset(live))


def served_totals(net: Network, states: ActualStates) -> PQ:
    el = energize(net, states)
    p = q = 0
    for b in net.bus_ids:
        pq = served_load(net, states, el, b)
        p += pq.p
        q += pq.q
    return PQ(p, q)


def plan_islands(net: Network, plan: RestorationPlan) -> Mapping[str, list[str]]:
    out: dict[str, list[str]] = {}
    for b, x in plan.predicted_microgrid.items():
        out.setdefault(x, []).append(b)
    return out
