"""Reachability and bus-to-DG simple paths under an assumption on unknown branches."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from mgform._kernels import floyd_closure
from mgform.netmodel import Network
from mgform.truthsim import BranchState

DEFAULT_PATH_CAP = 1024


class Assumption(str, Enum):
    UNKNOWN_OPEN = "unknown_open"
    UNKNOWN_CLOSED = "unknown_closed"


class PathExplosion(RuntimeError):
    pass


@dataclass(frozen=True)
class PathIndex:
    """Result of one FloydProcess call.

    ``paths[(bus, dg)]`` lists simple paths as branch-id tuples ordered from
    the bus towards the DG; a DG bus has the empty path to itself. Paths do
    not run *through* a second DG since no radial single-DG island can
    contain such a route.
    """

    bus_ids: tuple[str, ...]
    reach: np.ndarray
    paths: dict[tuple[str, str], list[tuple[str, ...]]]
    count: dict[str, int]
    edges: frozenset

    def reaches(self, a: str, b: str) -> bool:
        pos = {x: i for i, x in enumerate(self.bus_ids)}
        return bool(self.reach[pos[a], pos[b]])

    def paths_from(self, bus_id: str) -> list[tuple[str, tuple[str, ...]]]:
        """All ``(dg, path)`` pairs for one bus, DGs in network order."""
        out = []
        for (b, x), plist in self.paths.items():
            if b == bus_id:
                out.extend((x, p) for p in plist)
        return out


def effective_edges(net: Network, known: Mapping[str, BranchState], assume: Assumption) -> list[str]:
    keep = {BranchState.CLOSED}
    if assume is Assumption.UNKNOWN_CLOSED:
        keep.add(BranchState.UNKNOWN)
    return [k.id for k in net.branches if not k.faulted and known[k.id] in keep]


def floyd_process(
    net: Network,
    known: Mapping[str, BranchState],
    assume: Assumption,
    cap: int = DEFAULT_PATH_CAP,
) -> PathIndex:
    ids = net.bus_ids
    pos = {b: i for i, b in enumerate(ids)}
    edges = effective_edges(net, known, assume)
    adj = np.zeros((len(ids), len(ids)), dtype=bool)
    live: dict[str, list[tuple[str, str]]] = {b: [] for b in ids}
    for kid in edges:
        k = net.branch(kid)
        a, b = pos[k.from_bus], pos[k.to_bus]
        adj[a, b] = adj[b, a] = True
    edge_set = set(edges)
    for b in ids:
        live[b] = [(kid, v) for kid, v in net.neighbors(b) if kid in edge_set]
    dgs = set(net.dg_buses)
    reach = floyd_closure(adj, np.array([b not in dgs for b in ids], dtype=np.bool_))

    paths: dict[tuple[str, str], list[tuple[str, ...]]] = {}

    for x in net.dg_buses:
        xi = pos[x]
        for b in ids:
            if reach[pos[b], xi]:
                paths[(b, x)] = []
        trail: list[str] = []
        on_path = {x}

        def record(v: str) -> None:
            plist = paths[(v, x)]
            plist.append(tuple(reversed(trail)))
            if len(plist) > cap:
                raise PathExplosion(f"more than {cap} simple paths between {v} and DG {x}")

        def walk(u: str) -> None:
            for kid, v in live[u]:
                if v in on_path:
                    continue
                trail.append(kid)
                record(v)
                if v not in dgs:
                    on_path.add(v)
                    walk(v)
                    on_path.discard(v)
                trail.pop()

        record(x)
        walk(x)

    count = {b: 0 for b in ids}
    for (b, _x), plist in paths.items():
        plist.sort()
        count[b] += len(plist)
    return PathIndex(tuple(ids), reach, paths, count, frozenset(edges))
