import os
import subprocess
import sys
from collections import deque
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mgform import _accel, _kernels
from mgform.generate import generate_scenario
from mgform.oracle import kernel_inputs, unknown_branches
from mgform.restoration import build_model
from support import pipeline

GOLDEN = Path(__file__).parent / "golden"
needs_numba = pytest.mark.skipif(not _accel.USE_NUMBA, reason="numba disabled")


def bfs_reach(adj, transit):
    n = len(adj)
    out = np.zeros((n, n), dtype=bool)
    for s in range(n):
        out[s, s] = True
        queue = deque([s])
        while queue:
            u = queue.popleft()
            if u != s and not transit[u]:
                continue
            for v in np.flatnonzero(adj[u]):
                if not out[s, v]:
                    out[s, v] = True
                    queue.append(v)
    return out


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 14))
    bits = draw(st.lists(st.booleans(), min_size=n * n, max_size=n * n))
    adj = np.array(bits, dtype=bool).reshape(n, n)
    adj = adj | adj.T
    transit = np.array(draw(st.lists(st.booleans(), min_size=n, max_size=n)), dtype=bool)
    return adj, transit


@given(graphs())
def test_closure_variants_agree(g):
    adj, transit = g
    expect = bfs_reach(adj, transit)
    assert (_kernels._closure_numpy(adj, transit) == expect).all()
    assert (_kernels._closure_loops(adj, transit) == expect).all()
    assert (_kernels.floyd_closure(adj, transit) == expect).all()


@given(graphs())
def test_full_transit_is_transitive_closure(g):
    adj, _ = g
    reach = _kernels.floyd_closure(adj)
    assert (reach == bfs_reach(adj, np.ones(len(adj), dtype=bool))).all()


@needs_numba
@given(st.integers(0, 10_000), st.integers(8, 20), st.integers(1, 3))
def test_switch_enumeration_jit_matches_python(seed, n, dgs):
    net, truth, s, inf, _ = pipeline(generate_scenario(seed, n, dgs, weighted=True))
    m = build_model(net, inf, s)
    if m.n_free > 10:
        return
    args = (len(m.blocks), m.blk_nodes, m.blk_edges, m.blk_dgs, m.blk_bad, m.blk_p, m.blk_q, m.blk_val,
            m.blk_cap_p, m.blk_cap_q, m.fsrc, m.fdst)
    fast = _kernels.enumerate_switch_masks(*args)
    slow = _kernels.enumerate_switch_masks.py_func(*args)
    assert fast[0] == slow[0] and fast[1] == slow[1] and fast[2] == slow[2]


@needs_numba
@given(st.integers(0, 10_000), st.integers(8, 20), st.integers(1, 3))
def test_consistency_kernel_jit_matches_python(seed, n, dgs):
    net, truth, s, inf, _ = pipeline(generate_scenario(seed, n, dgs, max_unknown=7))
    args = kernel_inputs(net, s, unknown_branches(net, s), truth.shed, inf.probe_log)
    assert (_kernels.consistent_masks(*args) == _kernels.consistent_masks.py_func(*args)).all()


def fallback_env():
    return dict(os.environ, MGFORM_NO_NUMBA="1")


def test_fallback_reproduces_golden_report():
    proc = subprocess.run(
        [sys.executable, "-m", "mgform", "run", "default", "--format", "structured"],
        capture_output=True, text=True, env=fallback_env(),
    )
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout == (GOLDEN / "default_run.json").read_text()


def test_fallback_flag_is_honoured():
    code = "from mgform import _accel; print(_accel.USE_NUMBA)"
    proc = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=fallback_env())
    assert proc.stdout.strip() == "False"


def test_fallback_oracle_agrees():
    args = [sys.executable, "-m", "mgform", "oracle", "default", "--format", "structured"]
    fast = subprocess.run(args, capture_output=True, text=True)
    slow = subprocess.run(args, capture_output=True, text=True, env=fallback_env())
    assert fast.returncode == slow.returncode == 0
    assert fast.stdout == slow.stdout
