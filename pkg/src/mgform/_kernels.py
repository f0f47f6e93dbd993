"""Array kernels behind the graph code.

Each kernel is written in the numba-compatible subset so the same source
runs jitted or interpreted (see ``_accel``). The transitive closure also has
a vectorised numpy variant, which is what the fallback uses for it.
"""

from __future__ import annotations

import numpy as np

from mgform._accel import USE_NUMBA, jit


# -- transitive closure ---------------------------------------------------------

@jit
def _closure_loops(adj, transit):
    n = adj.shape[0]
    reach = adj.copy()
    for i in range(n):
        reach[i, i] = True
    for k in range(n):
        if not transit[k]:
            continue
        for i in range(n):
            if reach[i, k]:
                for j in range(n):
                    if reach[k, j]:
                        reach[i, j] = True
    return reach


def _closure_numpy(adj: np.ndarray, transit: np.ndarray) -> np.ndarray:
    reach = adj.copy()
    np.fill_diagonal(reach, True)
    for k in np.flatnonzero(transit):
        reach |= np.outer(reach[:, k], reach[k, :])
    return reach


def floyd_closure(adj: np.ndarray, transit: np.ndarray | None = None) -> np.ndarray:
    """Reflexive closure of a boolean adjacency matrix.

    Only nodes flagged in ``transit`` (default: all) may sit inside a path,
    so ``reach[i, j]`` means a walk from i to j whose interior avoids the
    other nodes. With every node a transit node this is the usual
    transitive closure.
    """
    adj = np.ascontiguousarray(adj, dtype=np.bool_)
    if transit is None:
        transit = np.ones(adj.shape[0], dtype=np.bool_)
    transit = np.ascontiguousarray(transit, dtype=np.bool_)
    if USE_NUMBA:
        return _closure_loops(adj, transit)
    return _closure_numpy(adj, transit)


def build_csr(n: int, src: np.ndarray, dst: np.ndarray):
    """Undirected adjacency in CSR form: bus v owns ``ptr[v]:ptr[v+1]``."""
    deg = np.zeros(n + 1, dtype=np.int64)
    for a, b in zip(src, dst):
        deg[a + 1] += 1
        deg[b + 1] += 1
    ptr = np.cumsum(deg)
    fill = ptr[:-1].copy()
    nbr = np.empty(ptr[-1], dtype=np.int64)
    edge = np.empty(ptr[-1], dtype=np.int64)
    for e, (a, b) in enumerate(zip(src, dst)):
        nbr[fill[a]] = b
        edge[fill[a]] = e
        fill[a] += 1
        nbr[fill[b]] = a
        edge[fill[b]] = e
        fill[b] += 1
    return ptr, nbr, edge


# -- radial simulation used by the consistency oracle --------------------------

@jit
def simulate_radial(n, dst, ptr, nbr, edge, closed, is_dg, lp, lq,
                    comp, order, par_edge, sub_p, sub_q, flow_p, flow_q, dg_p, dg_q):
    """Energize and solve flows for one switch configuration, in place.

    ``comp[v]`` is the supplying DG index or -1; ``flow_p[e]`` is the
    injection into ``dst[e]``. Returns False when an energized component is
    cyclic or contains more than one DG (the outputs are then garbage).
    """
    for v in range(n):
        comp[v] = -1
        dg_p[v] = 0
        dg_q[v] = 0
    for e in range(flow_p.shape[0]):
        flow_p[e] = 0
        flow_q[e] = 0
    for d in range(n):
        if not is_dg[d]:
            continue
        if comp[d] != -1:
            return False
        head = 0
        tail = 1
        order[0] = d
        comp[d] = d
        par_edge[d] = -1
        half_edges = 0
        while head < tail:
            u = order[head]
            head += 1
            for t in range(ptr[u], ptr[u + 1]):
                e = edge[t]
                if not closed[e]:
                    continue
                half_edges += 1
                v = nbr[t]
                if comp[v] == -1:
                    if is_dg[v]:
                        return False
                    comp[v] = d
                    par_edge[v] = e
                    order[tail] = v
                    tail += 1
        if half_edges // 2 >= tail:
            return False
        for i in range(tail):
            v = order[i]
            sub_p[v] = lp[v]
            sub_q[v] = lq[v]
        for i in range(tail - 1, 0, -1):
            v = order[i]
            e = par_edge[v]
            if dst[e] == v:
                flow_p[e] = sub_p[v]
                flow_q[e] = sub_q[v]
            else:
                flow_p[e] = -sub_p[v]
                flow_q[e] = -sub_q[v]
            u = nbr[ptr[v]]
            for t in range(ptr[v], ptr[v + 1]):
                if edge[t] == e:
                    u = nbr[t]
                    break
            sub_p[u] += sub_p[v]
            sub_q[u] += sub_q[v]
        dg_p[d] = sub_p[d]
        dg_q[d] = sub_q[d]
    return True


@jit
def consistent_masks(n, dst, ptr, nbr, edge, base_closed, unk, is_dg, lp, lq,
                     obs_bus, obs_live,
                     end_edge, end_bus, end_p, end_q,
                     dg_idx, dg_obs_p, dg_obs_q,
                     probe_bus, probe_dg):
    """Test every open/closed assignment of the ``unk`` branches.

    Bit j of the mask closes branch ``unk[j]``. An assignment is consistent
    when its simulated telemetry equals the observation field for field and
    every recorded probe is answered by the same DG.
    """
    m = base_closed.shape[0]
    u = unk.shape[0]
    total = 1 << u
    ok = np.zeros(total, dtype=np.bool_)
    closed = base_closed.copy()
    comp = np.empty(n, dtype=np.int64)
    order = np.empty(n, dtype=np.int64)
    par_edge = np.empty(n, dtype=np.int64)
    sub_p = np.empty(n, dtype=np.int64)
    sub_q = np.empty(n, dtype=np.int64)
    flow_p = np.empty(m, dtype=np.int64)
    flow_q = np.empty(m, dtype=np.int64)
    dg_p = np.empty(n, dtype=np.int64)
    dg_q = np.empty(n, dtype=np.int64)
    for mask in range(total):
        for j in range(u):
            closed[unk[j]] = (mask >> j) & 1 == 1
        if not simulate_radial(n, dst, ptr, nbr, edge, closed, is_dg, lp, lq,
                               comp, order, par_edge, sub_p, sub_q, flow_p, flow_q, dg_p, dg_q):
            continue
        good = True
        for i in range(obs_bus.shape[0]):
            if (comp[obs_bus[i]] != -1) != obs_live[i]:
                good = False
                break
        if good:
            for i in range(end_edge.shape[0]):
                e = end_edge[i]
                sign = 1 if dst[e] == end_bus[i] else -1
                if sign * flow_p[e] != end_p[i] or sign * flow_q[e] != end_q[i]:
                    good = False
                    break
        if good:
            for i in range(dg_idx.shape[0]):
                if dg_p[dg_idx[i]] != dg_obs_p[i] or dg_q[dg_idx[i]] != dg_obs_q[i]:
                    good = False
                    break
        if good:
            for i in range(probe_bus.shape[0]):
                if comp[probe_bus[i]] != probe_dg[i]:
                    good = False
                    break
        ok[mask] = good
    return ok


# -- exhaustive restoration search over contracted blocks -----------------------

@jit
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@jit
def enumerate_switch_masks(nb, blk_nodes, blk_edges, blk_dgs, blk_bad, blk_p, blk_q, blk_val,
                           blk_cap_p, blk_cap_q, fsrc, fdst):
    """Brute force over closed/open settings of the free switches.

    Returns ``(best value, first mask reaching it, number of feasible masks)``.
    A component holding a DG must be a tree with exactly one DG, no forbidden
    block and load within that DG's capacity; DG-less components are dead
    and unconstrained.
    """
    f = fsrc.shape[0]
    parent = np.empty(nb, dtype=np.int64)
    nodes = np.empty(nb, dtype=np.int64)
    edges = np.empty(nb, dtype=np.int64)
    dgs = np.empty(nb, dtype=np.int64)
    bad = np.empty(nb, dtype=np.int64)
    p = np.empty(nb, dtype=np.int64)
    q = np.empty(nb, dtype=np.int64)
    cp = np.empty(nb, dtype=np.int64)
    cq = np.empty(nb, dtype=np.int64)
    val = np.empty(nb, dtype=np.float64)
    best = -1.0
    best_mask = -1
    n_feasible = 0
    for mask in range(1 << f):
        for b in range(nb):
            parent[b] = b
        for j in range(f):
            if (mask >> j) & 1:
                ra = _find(parent, fsrc[j])
                rb = _find(parent, fdst[j])
                if ra != rb:
                    parent[ra] = rb
        for b in range(nb):
            nodes[b] = 0
            edges[b] = 0
            dgs[b] = 0
            bad[b] = 0
            p[b] = 0
            q[b] = 0
            cp[b] = 0
            cq[b] = 0
            val[b] = 0.0
        for b in range(nb):
            r = _find(parent, b)
            nodes[r] += blk_nodes[b]
            edges[r] += blk_edges[b]
            dgs[r] += blk_dgs[b]
            bad[r] += blk_bad[b]
            p[r] += blk_p[b]
            q[r] += blk_q[b]
            cp[r] += blk_cap_p[b]
            cq[r] += blk_cap_q[b]
            val[r] += blk_val[b]
        for j in range(f):
            if (mask >> j) & 1:
                edges[_find(parent, fsrc[j])] += 1
        feasible = True
        total = 0.0
        for b in range(nb):
            if parent[b] != b or dgs[b] == 0:
                continue
            if dgs[b] > 1 or bad[b] > 0 or edges[b] != nodes[b] - 1 or p[b] > cp[b] or q[b] > cq[b]:
                feasible = False
                break
            total += val[b]
        if not feasible:
            continue
        n_feasible += 1
        if total > best:
            best = total
            best_mask = mask
    return best, best_mask, n_feasible
