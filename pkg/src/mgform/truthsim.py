"""Ground-truth feeder simulation.

Everything here is lossless and integer valued: the flow on a branch is the
served load hanging below it in the DG-rooted tree. That is all the OC ever
looks at (zero / non-zero tests and DG output deltas), so no impedances are
modelled.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, NamedTuple

from mgform.netmodel import Network


class BusState(str, Enum):
    ELECTRIFIED = "electrified"
    UNPOWERED = "unpowered"
    UNKNOWN = "unknown"


class BranchState(str, Enum):
    CLOSED = "closed"
    OPEN = "open"
    UNKNOWN = "unknown"


class PQ(NamedTuple):
    p: int
    q: int


ZERO = PQ(0, 0)


class TruthError(RuntimeError):
    pass


class CyclicEnergizedComponent(TruthError):
    pass


class MultiDgComponent(TruthError):
    pass


class ProbeRefused(RuntimeError):
    """A disturbance probe was declined."""


class ProbeNotAllowed(ProbeRefused):
    pass


class BusNotElectrified(ProbeRefused):
    pass


@dataclass(frozen=True)
class ActualStates:
    closed: Mapping[str, bool]
    shed: frozenset = frozenset()
    tripped: frozenset = frozenset()

    def is_closed(self, net: Network, branch_id: str) -> bool:
        """Physical conduction: faulted branches never conduct."""
        return self.closed[branch_id] and not net.branch(branch_id).faulted

    def with_closed(self, updates: Mapping[str, bool]) -> ActualStates:
        merged = dict(self.closed)
        merged.update(updates)
        return replace(self, closed=merged)


def initial_states(net: Network) -> ActualStates:
    return ActualStates({k.id: k.initial_closed for k in net.branches})


@dataclass(frozen=True)
class Component:
    buses: tuple[str, ...]
    n_edges: int
    dgs: tuple[str, ...]

    @property
    def cyclic(self) -> bool:
        return self.n_edges >= len(self.buses)


@dataclass(frozen=True)
class Electrification:
    component: dict[str, int]
    energized: dict[int, bool]
    root_dg: dict[int, str | None]

    def is_energized(self, bus_id: str) -> bool:
        return self.energized[self.component[bus_id]]

    def supplier(self, bus_id: str) -> str | None:
        return self.root_dg[self.component[bus_id]]


@dataclass(frozen=True)
class FlowSolution:
    branch_flow: dict[tuple[str, str], PQ]
    dg_output: dict[str, PQ]


@dataclass(frozen=True)
class TelemetrySnapshot:
    bus_state: dict[str, BusState]
    branch_state: dict[str, BranchState]
    flows: dict[tuple[str, str], PQ] = field(default_factory=dict)
    dg_output: dict[str, PQ] = field(default_factory=dict)

    def unknown_branches(self) -> list[str]:
        return [k for k, s in self.branch_state.items() if s is BranchState.UNKNOWN]

    def unknown_buses(self) -> list[str]:
        return [b for b, s in self.bus_state.items() if s is BusState.UNKNOWN]


@dataclass(frozen=True)
class ProbeResult:
    bus: str
    delta_p: int
    dg_before: dict[str, int]
    dg_after: dict[str, int]


def components(net: Network, st: ActualStates) -> list[Component]:
    """Connected components over conducting branches, in bus document order."""
    seen: set[str] = set()
    out = []
    for b in net.buses:
        if b.id in seen:
            continue
        members = [b.id]
        seen.add(b.id)
        edges: set[str] = set()
        queue = deque([b.id])
        while queue:
            u = queue.popleft()
            for kid, v in net.neighbors(u):
                if not st.is_closed(net, kid):
                    continue
                edges.add(kid)
                if v not in seen:
                    seen.add(v)
                    members.append(v)
                    queue.append(v)
        dgs = tuple(x for x in members if net.bus(x).is_dg and x not in st.tripped)
        out.append(Component(tuple(members), len(edges), dgs))
    return out


def energize(net: Network, st: ActualStates) -> Electrification:
    comp_of: dict[str, int] = {}
    energized: dict[int, bool] = {}
    root: dict[int, str | None] = {}
    for ci, comp in enumerate(components(net, st)):
        for x in comp.buses:
            comp_of[x] = ci
        live = bool(comp.dgs)
        if live and comp.cyclic:
            raise CyclicEnergizedComponent(f"energized component containing {comp.buses[0]} has a cycle")
        if len(comp.dgs) >= 2:
            raise MultiDgComponent(f"component fed by several DGs: {', '.join(comp.dgs)}")
        energized[ci] = live
        root[ci] = comp.dgs[0] if live else None
    return Electrification(comp_of, energized, root)


def served_load(net: Network, st: ActualStates, el: Electrification, bus_id: str) -> PQ:
    if bus_id in st.shed or not el.is_energized(bus_id):
        return ZERO
    b = net.bus(bus_id)
    return PQ(b.load_p, b.load_q)


def _solve(net: Network, st: ActualStates, el: Electrification, extra_p: Mapping[str, int]) -> FlowSolution:
    flow = {(k.id, end): ZERO for k in net.branches for end in k.ends}
    dg_out = {x: ZERO for x in net.dg_buses}
    for ci, live in el.energized.items():
        if not live:
            continue
        dg = el.root_dg[ci]
        parent: dict[str, tuple[str, str] | None] = {dg: None}
        order = [dg]
        queue = deque([dg])
        while queue:
            u = queue.popleft()
            for kid, v in net.neighbors(u):
                if st.is_closed(net, kid) and v not in parent:
                    parent[v] = (kid, u)
                    order.append(v)
                    queue.append(v)
        sub: dict[str, list[int]] = {}
        for x in order:
            pq = served_load(net, st, el, x)
            sub[x] = [pq.p + extra_p.get(x, 0), pq.q]
        for x in reversed(order):
            link = parent[x]
            if link is None:
                continue
            kid, up = link
            p, q = sub[x]
            flow[(kid, x)] = PQ(p, q)
            flow[(kid, up)] = PQ(-p, -q)
            sub[up][0] += p
            sub[up][1] += q
        dg_out[dg] = PQ(*sub[dg])
    return FlowSolution(flow, dg_out)


def solve_flows(net: Network, st: ActualStates, el: Electrification) -> FlowSolution:
    return _solve(net, st, el, {})


def observe(
    net: Network,
    st: ActualStates,
    flows: FlowSolution,
    el: Electrification | None = None,
) -> TelemetrySnapshot:
    """Project ground truth onto what online FTUs report to the OC."""
    if el is None:
        el = energize(net, st)
    bus_state = {}
    for b in net.buses:
        if not b.ftu_online:
            bus_state[b.id] = BusState.UNKNOWN
        elif el.is_energized(b.id):
            bus_state[b.id] = BusState.ELECTRIFIED
        else:
            bus_state[b.id] = BusState.UNPOWERED
    branch_state = {}
    seen_flows = {}
    for k in net.branches:
        if net.online(k.ctrl_bus):
            branch_state[k.id] = BranchState.CLOSED if st.is_closed(net, k.id) else BranchState.OPEN
        else:
            branch_state[k.id] = BranchState.UNKNOWN
        for end in k.ends:
            if net.online(end):
                seen_flows[(k.id, end)] = flows.branch_flow[(k.id, end)]
    dg_output = {x: flows.dg_output[x] for x in net.dg_buses if net.online(x)}
    return TelemetrySnapshot(bus_state, branch_state, seen_flows, dg_output)


def snapshot_of(net: Network, st: ActualStates) -> TelemetrySnapshot:
    el = energize(net, st)
    return observe(net, st, solve_flows(net, st, el), el)


def apply_probe(net: Network, st: ActualStates, bus_id: str, delta_p: int) -> ProbeResult:
    """Briefly change the load at ``bus_id`` by ``delta_p`` kW and report DG outputs.

    Negative ``delta_p`` cuts load off, positive picks shed load up. The
    ground truth is not modified.
    """
    b = net.bus(bus_id)
    if not b.ftu_online:
        raise ProbeNotAllowed(f"bus {bus_id} is not observable/controllable")
    if not b.probe_allowed:
        raise ProbeNotAllowed(f"bus {bus_id} does not allow disturbance operations")
    el = energize(net, st)
    if not el.is_energized(bus_id):
        raise BusNotElectrified(f"bus {bus_id} is not electrified")
    served = served_load(net, st, el, bus_id).p
    if delta_p < 0 and -delta_p > served:
        raise ProbeNotAllowed(f"cannot cut {-delta_p} kW at {bus_id}, only {served} kW served")
    if delta_p > 0 and (bus_id not in st.shed or delta_p > b.load_p):
        raise ProbeNotAllowed(f"cannot pick up {delta_p} kW at {bus_id}")
    before = _solve(net, st, el, {})
    after = _solve(net, st, el, {bus_id: delta_p})
    return ProbeResult(
        bus_id,
        delta_p,
        {x: pq.p for x, pq in before.dg_output.items()},
        {x: pq.p for x, pq in after.dg_output.items()},
    )


def trip_overloads(net: Network, st: ActualStates) -> tuple[ActualStates, list[str]]:
    """Trip every DG serving more active power than its capacity, to a fixpoint.

    Serving exactly ``cap_p`` is feasible.
    """
    log: list[str] = []
    while True:
        el = energize(net, st)
        out = solve_flows(net, st, el).dg_output
        over = [
            x for x in net.dg_buses
            if x not in st.tripped and out[x].p > net.bus(x).dg.cap_p
        ]
        if not over:
            return st, log
        log.extend(over)
        st = replace(st, tripped=st.tripped | frozenset(over))
