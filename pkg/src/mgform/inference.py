"""Unobservable-state inference.

Resolves the switch state of branches whose FTU is offline from what the
online FTUs report, using three rules:

* flow rule: a non-zero branch-end flow means closed; zero flow into an
  electrified end means open;
* unique-path rule: an electrified bus with exactly one candidate supply
  path (unknown branches assumed closed) and none over known-closed
  branches must be fed along that path;
* probe rule: briefly cut load at a bus with several candidate paths and
  see which DG output drops by the same amount.

Whatever stays unknown is locked out of restoration control.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Protocol

from mgform.netmodel import Network
from mgform.pathindex import DEFAULT_PATH_CAP, Assumption, PathIndex, floyd_process
from mgform.truthsim import (
    ActualStates,
    BranchState,
    BusState,
    ProbeRefused,
    ProbeResult,
    TelemetrySnapshot,
    apply_probe,
)


class ProbeExecutor(Protocol):
    def request(self, bus_id: str, delta_p: int) -> ProbeResult: ...


class SimulatedProbeExecutor:
    """Answers probes from a ground-truth state; keeps a call log."""

    def __init__(self, net: Network, states: ActualStates):
        self.net = net
        self.states = states
        self.calls: list[tuple[str, int]] = []

    def request(self, bus_id: str, delta_p: int) -> ProbeResult:
        self.calls.append((bus_id, delta_p))
        return apply_probe(self.net, self.states, bus_id, delta_p)


@dataclass(frozen=True)
class ProbeRecord:
    bus: str
    delta_p: int
    status: str  # "attributed", "refused", "unmatched", "skipped"
    result: ProbeResult | None = None
    supplier: str | None = None
    note: str = ""


@dataclass(frozen=True)
class InferenceResult:
    resolved_branch: dict[str, BranchState]
    resolved_bus: dict[str, BusState]
    membership: dict[str, str]
    lockout_branches: frozenset
    no_energize_buses: frozenset
    probe_log: list[ProbeRecord] = field(default_factory=list)
    known_branch: dict[str, BranchState] = field(default_factory=dict)
    passes: int = 0

    def closed(self) -> set[str]:
        return {k for k, s in self.resolved_branch.items() if s is BranchState.CLOSED}

    def opened(self) -> set[str]:
        return {k for k, s in self.resolved_branch.items() if s is BranchState.OPEN}


def working_states(net: Network, snapshot: TelemetrySnapshot) -> dict[str, BranchState]:
    """Snapshot branch states with faulted branches pinned open.

    Fault locations are network data the OC already has, so pinning them is
    not an inference and never shows up in ``resolved_branch``.
    """
    known = dict(snapshot.branch_state)
    for k in net.branches:
        if k.faulted:
            known[k.id] = BranchState.OPEN
    return known


def _flow_mag(snapshot: TelemetrySnapshot, kid: str, bus_id: str) -> int:
    pq = snapshot.flows[(kid, bus_id)]
    return abs(pq.p) + abs(pq.q)


def rule_flow(
    net: Network,
    snapshot: TelemetrySnapshot,
    known: Mapping[str, BranchState] | None = None,
) -> dict[str, BranchState]:
    if known is None:
        known = working_states(net, snapshot)
    updates = {}
    for k in net.branches:
        if known[k.id] is not BranchState.UNKNOWN:
            continue
        ends = [b for b in dict.fromkeys(k.ends) if (k.id, b) in snapshot.flows]
        if not ends:
            continue
        if any(_flow_mag(snapshot, k.id, b) != 0 for b in ends):
            updates[k.id] = BranchState.CLOSED
        elif any(snapshot.bus_state[b] is BusState.ELECTRIFIED for b in ends):
            # with positive loads a closed branch into a live bus carries flow
            updates[k.id] = BranchState.OPEN
    return updates


def _electrified_observable(snapshot: TelemetrySnapshot) -> list[str]:
    return sorted(b for b, s in snapshot.bus_state.items() if s is BusState.ELECTRIFIED)


def rule_unique_path(
    net: Network,
    snapshot: TelemetrySnapshot,
    idx_d1: PathIndex,
    idx_c: PathIndex,
    known: Mapping[str, BranchState],
) -> dict[str, BranchState]:
    updates = {}
    for i in _electrified_observable(snapshot):
        if idx_d1.count[i] != 0 or idx_c.count[i] != 1:
            continue
        [(_dg, path)] = idx_c.paths_from(i)
        for kid in path:
            if known[kid] is BranchState.UNKNOWN:
                updates[kid] = BranchState.CLOSED
    return updates


def probe_magnitude(net: Network, bus_id: str, default: int) -> int:
    return min(net.bus(bus_id).load_p, default)


def plan_and_apply_probes(
    net: Network,
    snapshot: TelemetrySnapshot,
    idx_d1: PathIndex,
    idx_c: PathIndex,
    executor: ProbeExecutor,
    known: Mapping[str, BranchState],
    *,
    magnitude_default: int = 100,
    already_probed: set[str] | None = None,
) -> tuple[dict[str, BranchState], dict[str, str], list[ProbeRecord]]:
    """Run one round of disturbance probes in bus-id order."""
    done = already_probed if already_probed is not None else set()
    updates: dict[str, BranchState] = {}
    membership: dict[str, str] = {}
    log: list[ProbeRecord] = []
    for i in _electrified_observable(snapshot):
        if i in done or idx_c.count[i] < 2 or idx_d1.count[i] != 0:
            continue
        if not net.bus(i).probe_allowed:
            continue
        done.add(i)
        mag = probe_magnitude(net, i, magnitude_default)
        if mag <= 0:
            log.append(ProbeRecord(i, 0, "skipped", note="no interruptible load"))
            continue
        try:
            res = executor.request(i, -mag)
        except ProbeRefused as exc:
            log.append(ProbeRecord(i, -mag, "refused", note=str(exc)))
            continue
        matched = [
            x for x in sorted(res.dg_before)
            if round(res.dg_before[x] - res.dg_after[x] - mag) == 0
        ]
        if len(matched) != 1:
            log.append(ProbeRecord(i, -mag, "unmatched", res, note=f"{len(matched)} DGs matched"))
            continue
        x = matched[0]
        log.append(ProbeRecord(i, -mag, "attributed", res, x))
        candidates = idx_c.paths.get((i, x), [])
        if len(candidates) == 1:
            for kid in candidates[0]:
                if known[kid] is BranchState.UNKNOWN:
                    updates[kid] = BranchState.CLOSED
        else:
            membership[i] = x
    return updates, membership, log


def resolve_buses(
    net: Network,
    snapshot: TelemetrySnapshot,
    known: Mapping[str, BranchState],
) -> dict[str, BusState]:
    """Energization of unobservable buses implied by known switch states.

    Buses joined by known-closed branches share their fate: electrified if
    the group holds a DG or an observed-live bus, unpowered if it holds an
    observed-dead bus or has no DG and is fenced in by known-open branches.
    """
    out: dict[str, BusState] = {}
    seen: set[str] = set()
    for start in net.bus_ids:
        if start in seen:
            continue
        group = [start]
        seen.add(start)
        fenced = True
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for kid, v in net.neighbors(u):
                s = known[kid]
                if s is BranchState.CLOSED:
                    if v not in seen:
                        seen.add(v)
                        group.append(v)
                        queue.append(v)
                elif s is BranchState.UNKNOWN:
                    fenced = False
        live = any(net.bus(b).is_dg or snapshot.bus_state[b] is BusState.ELECTRIFIED for b in group)
        dead = any(snapshot.bus_state[b] is BusState.UNPOWERED for b in group)
        if live and dead:
            continue  # contradictory telemetry, leave it alone
        if live:
            state = BusState.ELECTRIFIED
        elif dead or fenced:
            state = BusState.UNPOWERED
        else:
            continue
        for b in group:
            if snapshot.bus_state[b] is BusState.UNKNOWN:
                out[b] = state
    return out


def lockout(
    net: Network,
    snapshot: TelemetrySnapshot,
    known: Mapping[str, BranchState],
    resolved_bus: Mapping[str, BusState],
    idx_d2: PathIndex,
) -> tuple[frozenset, frozenset]:
    locked = {kid for kid, s in known.items() if s is BranchState.UNKNOWN}
    for i in _electrified_observable(snapshot):
        if idx_d2.count[i] == 0:
            locked.update(net.incidence[i])
    no_energize = {
        b for b, s in snapshot.bus_state.items()
        if s is BusState.UNKNOWN and resolved_bus.get(b) is not BusState.ELECTRIFIED
    }
    return frozenset(locked), frozenset(no_energize)


def run_algorithm1(
    net: Network,
    snapshot: TelemetrySnapshot,
    executor: ProbeExecutor | None = None,
    *,
    probe_magnitude_default: int = 100,
    path_cap: int = DEFAULT_PATH_CAP,
    max_passes: int | None = None,
) -> InferenceResult:
    """Apply the flow rule, then iterate unique-path and probe rules to a fixpoint.

    ``max_passes=1`` reproduces a single sweep of the rules.
    """
    known = working_states(net, snapshot)
    resolved: dict[str, BranchState] = {}

    def apply(updates: Mapping[str, BranchState]) -> bool:
        changed = False
        for kid, s in updates.items():
            if known[kid] is BranchState.UNKNOWN:
                known[kid] = s
                resolved[kid] = s
                changed = True
        return changed

    apply(rule_flow(net, snapshot, known))

    membership: dict[str, str] = {}
    log: list[ProbeRecord] = []
    probed: set[str] = set()
    passes = 0
    while max_passes is None or passes < max_passes:
        passes += 1
        idx_d1 = floyd_process(net, known, Assumption.UNKNOWN_OPEN, path_cap)
        idx_c = floyd_process(net, known, Assumption.UNKNOWN_CLOSED, path_cap)
        changed = apply(rule_unique_path(net, snapshot, idx_d1, idx_c, known))
        if executor is not None:
            if changed:
                idx_d1 = floyd_process(net, known, Assumption.UNKNOWN_OPEN, path_cap)
                idx_c = floyd_process(net, known, Assumption.UNKNOWN_CLOSED, path_cap)
            n_before = len(probed)
            upd, mem, entries = plan_and_apply_probes(
                net, snapshot, idx_d1, idx_c, executor, known,
                magnitude_default=probe_magnitude_default, already_probed=probed,
            )
            changed |= apply(upd)
            membership.update(mem)
            log.extend(entries)
            changed |= len(probed) != n_before
        if not changed:
            break

    resolved_bus = resolve_buses(net, snapshot, known)
    idx_d2 = floyd_process(net, known, Assumption.UNKNOWN_OPEN, path_cap)
    locked, no_energize = lockout(net, snapshot, known, resolved_bus, idx_d2)
    return InferenceResult(
        resolved_branch=resolved,
        resolved_bus=resolved_bus,
        membership=membership,
        lockout_branches=locked,
        no_energize_buses=no_energize,
        probe_log=log,
        known_branch=known,
        passes=passes,
    )
