"""Random islanded feeders for the property suites and ``mgform gen``.

Every generated case satisfies what the soundness guarantees need: radial
single-DG islands in the initial state, all loads >= 1 kW, nothing shed,
and DG capacities that cover their current island.
"""

from __future__ import annotations

import random
from collections import deque

from mgform.netmodel import DG, Branch, Bus, Network, Scenario


def _components(n: int, edges: list[tuple[int, int]]) -> list[int]:
    comp = list(range(n))

    def find(x):
        while comp[x] != x:
            comp[x] = comp[comp[x]]
            x = comp[x]
        return x

    for a, b in edges:
        comp[find(a)] = find(b)
    return [find(i) for i in range(n)]


def _path(n: int, edges: list[tuple[int, int, int]], a: int, b: int) -> list[int]:
    """Edge indices on the tree path a -> b (edges given as (idx, u, v))."""
    adj: dict[int, list[tuple[int, int]]] = {i: [] for i in range(n)}
    for e, u, v in edges:
        adj[u].append((e, v))
        adj[v].append((e, u))
    prev = {a: None}
    queue = deque([a])
    while queue:
        u = queue.popleft()
        for e, v in adj[u]:
            if v not in prev:
                prev[v] = (e, u)
                queue.append(v)
    out = []
    while prev[b] is not None:
        e, b = prev[b]
        out.append(e)
    return out


def generate_scenario(
    seed: int,
    n_buses: int = 20,
    n_dgs: int = 2,
    *,
    offline_rate: float = 0.3,
    max_unknown: int | None = None,
    weighted: bool = False,
) -> Scenario:
    """Reproducible random feeder; ``weighted`` draws per-bus weights from {0.5, 1, 2}.

    Weights stay dyadic so weighted objectives are exact in floating point.
    """
    if not 2 <= n_buses <= 200:
        raise ValueError("n_buses out of range")
    if not 1 <= n_dgs <= min(4, n_buses):
        raise ValueError("n_dgs out of range")
    rng = random.Random(seed)
    width = max(2, len(str(n_buses)))
    ids = [f"b{i + 1:0{width}d}" for i in range(n_buses)]

    tree = [(i, rng.randrange(max(0, i - 6), i), i) for i in range(1, n_buses)]
    dg_idx = sorted(rng.sample(range(n_buses), n_dgs))
    switchable = {e: rng.random() < 0.8 for e, _, _ in tree}
    faulted = set(rng.sample([e for e, _, _ in tree], min(len(tree), rng.randint(1, 3))))
    closed = {e for e, _, _ in tree if e not in faulted}

    # split any island holding several DGs
    while True:
        live = [(e, u, v) for e, u, v in tree if e in closed]
        comp = _components(n_buses, [(u, v) for _, u, v in live])
        seen: dict[int, int] = {}
        clash = None
        for d in dg_idx:
            if comp[d] in seen:
                clash = (seen[comp[d]], d)
                break
            seen[comp[d]] = d
        if clash is None:
            break
        on_path = _path(n_buses, live, *clash)
        e = rng.choice(on_path)
        switchable[e] = True
        closed.discard(e)
    for e, _, _ in tree:
        if e in closed and switchable[e] and rng.random() < 0.1:
            closed.discard(e)

    adjacent = {frozenset((u, v)) for _, u, v in tree}
    ties: list[tuple[int, int]] = []
    for _ in range(rng.randint(1, 3) if n_buses >= 6 else 0):
        for _attempt in range(20):
            a, b = rng.sample(range(n_buses), 2)
            if frozenset((a, b)) not in adjacent:
                adjacent.add(frozenset((a, b)))
                ties.append((a, b))
                break
    tie_closed = set()
    for t, (a, b) in enumerate(ties):
        if rng.random() < 0.3:
            live = [(u, v) for e, u, v in tree if e in closed] + [ties[x] for x in tie_closed]
            comp = _components(n_buses, live)
            if comp[a] == comp[b]:
                continue
            dgs_a = any(comp[d] == comp[a] for d in dg_idx)
            dgs_b = any(comp[d] == comp[b] for d in dg_idx)
            if not (dgs_a and dgs_b):
                tie_closed.add(t)

    load_p = [rng.randint(1, 200) for _ in range(n_buses)]
    load_q = [max(0, round(p * rng.uniform(0.2, 0.6))) for p in load_p]
    live = [(u, v) for e, u, v in tree if e in closed] + [ties[x] for x in tie_closed]
    comp = _components(n_buses, live)
    total_p = sum(load_p)
    caps = {}
    for d in dg_idx:
        members = [i for i in range(n_buses) if comp[i] == comp[d]]
        sp = sum(load_p[i] for i in members)
        sq = sum(load_q[i] for i in members)
        caps[d] = DG(sp + rng.randint(0, total_p // 2), sq + rng.randint(0, total_p // 4))

    def outages():
        return {i for i in range(n_buses) if rng.random() < offline_rate}

    ctrl = {e: rng.choice((u, v)) for e, u, v in tree}
    tie_ctrl = [rng.choice(t) for t in ties]
    offline = outages()
    if max_unknown is not None:
        def n_unknown(off):
            return sum(1 for e, _, _ in tree if ctrl[e] in off and e not in faulted) + sum(
                1 for c in tie_ctrl if c in off)
        while n_unknown(offline) > max_unknown:
            offline = outages()

    weights = [rng.choice((1.0, 1.0, 2.0, 0.5)) if weighted else 1.0 for _ in range(n_buses)]
    buses = [
        Bus(
            ids[i], load_p[i], load_q[i],
            weight=weights[i],
            dg=caps.get(i),
            ftu_online=i not in offline,
            probe_allowed=rng.random() < 0.85,
        )
        for i in range(n_buses)
    ]
    branches = [
        Branch(
            f"L{e:02d}", ids[u], ids[v],
            switchable=switchable[e], faulted=e in faulted, ctrl_bus=ids[ctrl[e]],
            initial_closed=e in closed,
        )
        for e, u, v in tree
    ]
    branches += [
        Branch(
            f"T{t + 1}", ids[a], ids[b], switchable=True, faulted=False,
            ctrl_bus=ids[tie_ctrl[t]], initial_closed=t in tie_closed,
        )
        for t, (a, b) in enumerate(ties)
    ]
    return Scenario(
        Network(tuple(buses), tuple(branches)),
        f"random feeder seed={seed} buses={n_buses} dgs={n_dgs}",
        rng.randint(20, 150),
    )
