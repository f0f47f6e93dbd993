"""Brute-force consistency oracle for topology inference.

Enumerates every open/closed assignment of the unknown branches, simulates
each one and keeps those that reproduce the observed telemetry exactly. A
branch is *forced* when every surviving assignment agrees on it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from mgform import _kernels
from mgform.inference import InferenceResult, ProbeRecord
from mgform.netmodel import Network
from mgform.truthsim import BranchState, BusState, TelemetrySnapshot

DEFAULT_MAX_UNKNOWN = 20


class TooManyUnknowns(RuntimeError):
    pass


@dataclass(frozen=True)
class ConsistentSet:
    unknown: tuple[str, ...]
    assignments: list[dict[str, bool]]
    forced: dict[str, BranchState]


def unknown_branches(net: Network, snapshot: TelemetrySnapshot) -> list[str]:
    """Branches the oracle varies: unknown in the snapshot and not faulted."""
    return [
        k.id for k in net.branches
        if snapshot.branch_state[k.id] is BranchState.UNKNOWN and not k.faulted
    ]


def kernel_inputs(net: Network, snapshot: TelemetrySnapshot, unk, shed=(), probes=()) -> tuple:
    """Argument tuple for ``_kernels.consistent_masks``."""
    ids = net.bus_ids
    pos = {b: i for i, b in enumerate(ids)}
    kpos = {k.id: e for e, k in enumerate(net.branches)}
    shed = set(shed)
    n = len(ids)
    src = np.array([pos[k.from_bus] for k in net.branches], dtype=np.int64)
    dst = np.array([pos[k.to_bus] for k in net.branches], dtype=np.int64)
    ptr, nbr, edge = _kernels.build_csr(n, src, dst)
    base = np.array([
        (not k.faulted) and snapshot.branch_state[k.id] is BranchState.CLOSED
        for k in net.branches
    ], dtype=np.bool_)
    unk_idx = np.array([kpos[k] for k in unk], dtype=np.int64)
    is_dg = np.array([b.is_dg for b in net.buses], dtype=np.bool_)
    lp = np.array([0 if b.id in shed else b.load_p for b in net.buses], dtype=np.int64)
    lq = np.array([0 if b.id in shed else b.load_q for b in net.buses], dtype=np.int64)

    observed = [b for b in ids if snapshot.bus_state[b] is not BusState.UNKNOWN]
    obs_bus = np.array([pos[b] for b in observed], dtype=np.int64)
    obs_live = np.array([snapshot.bus_state[b] is BusState.ELECTRIFIED for b in observed], dtype=np.bool_)
    ends = sorted(snapshot.flows, key=lambda kb: (kpos[kb[0]], pos[kb[1]]))
    end_edge = np.array([kpos[k] for k, _ in ends], dtype=np.int64)
    end_bus = np.array([pos[b] for _, b in ends], dtype=np.int64)
    end_p = np.array([snapshot.flows[e].p for e in ends], dtype=np.int64)
    end_q = np.array([snapshot.flows[e].q for e in ends], dtype=np.int64)
    dgs = sorted(snapshot.dg_output, key=pos.get)
    dg_idx = np.array([pos[x] for x in dgs], dtype=np.int64)
    dg_p = np.array([snapshot.dg_output[x].p for x in dgs], dtype=np.int64)
    dg_q = np.array([snapshot.dg_output[x].q for x in dgs], dtype=np.int64)
    attributed = [r for r in probes if r.status == "attributed" and r.supplier is not None]
    probe_bus = np.array([pos[r.bus] for r in attributed], dtype=np.int64)
    probe_dg = np.array([pos[r.supplier] for r in attributed], dtype=np.int64)
    return (
        n, dst, ptr, nbr, edge, base, unk_idx, is_dg, lp, lq,
        obs_bus, obs_live, end_edge, end_bus, end_p, end_q,
        dg_idx, dg_p, dg_q, probe_bus, probe_dg,
    )


def enumerate_consistent(
    net: Network,
    snapshot: TelemetrySnapshot,
    shed: Iterable[str] = (),
    probes: Iterable[ProbeRecord] = (),
    max_unknown: int = DEFAULT_MAX_UNKNOWN,
) -> ConsistentSet:
    """All unknown-branch assignments consistent with ``snapshot``.

    ``shed`` comes from ground truth. Attributed entries in ``probes`` add
    the constraint that the probed bus is supplied by the DG that answered.
    Assignments that make an energized island cyclic or multi-DG are
    physically inadmissible and dropped.
    """
    unk = unknown_branches(net, snapshot)
    if len(unk) > max_unknown:
        raise TooManyUnknowns(f"{len(unk)} unknown branches exceed the cap of {max_unknown}")
    ok = _kernels.consistent_masks(*kernel_inputs(net, snapshot, unk, shed, probes))
    assignments = [
        {kid: bool((mask >> j) & 1) for j, kid in enumerate(unk)}
        for mask in np.flatnonzero(ok).tolist()
    ]
    forced = {}
    if assignments:
        for kid in unk:
            vals = {a[kid] for a in assignments}
            if len(vals) == 1:
                forced[kid] = BranchState.CLOSED if vals.pop() else BranchState.OPEN
    return ConsistentSet(tuple(unk), assignments, forced)


def contained(inf: InferenceResult, cs: ConsistentSet) -> bool:
    """Every state resolved by inference is forced, with the same value."""
    return all(cs.forced.get(k) is s for k, s in inf.resolved_branch.items())


def completeness_ratio(inf: InferenceResult, cs: ConsistentSet) -> float:
    if not cs.forced:
        return 1.0
    hit = sum(1 for k, s in cs.forced.items() if inf.resolved_branch.get(k) is s)
    return hit / len(cs.forced)
