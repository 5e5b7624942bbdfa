import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import graphs
from railguard import _core, _kernels_py
from railguard.engine import advance
from railguard.generate import MIXED, base_network, train_sequence
from railguard.maxsum import _flatten
from railguard.world import World

cython = pytest.importorskip("railguard._kernels", reason="compiled kernels not built")


def test_default_backend_is_compiled():
    assert _core.BACKEND == "cython"


def test_pure_python_switch():
    env = dict(os.environ, RAILGUARD_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from railguard import _core; print(_core.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True).stdout
    assert out.strip() == "python"


def gap_args(world):
    net = world.network
    track, lo, hi = world.layout[:3]
    return track, lo, hi, net.track_u, net.track_v, net.track_len, net.dist


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 30), st.integers(0, 20))
def test_pair_gaps_agree(seed, m, ticks):
    net = base_network()
    w = World(net, tuple(train_sequence(seed, m, net, MIXED)))
    for _ in range(ticks):
        w = advance(w)
    args = gap_args(w)
    fast = cython.pair_gaps(*args)
    slow = _kernels_py.pair_gaps(*args)
    assert fast.shape == (m, m)
    np.testing.assert_array_equal(fast, slow)
    np.testing.assert_array_equal(fast, fast.T)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_enumeration_agrees(seed):
    g = graphs.random_tree_graph(seed, 1, 12)
    owner, ptr, idx, beta = _flatten(g)
    n = len(g.variables)
    assert cython.enumerate_optimum(n, owner, ptr, idx, beta) == \
        _kernels_py.enumerate_optimum(n, owner, ptr, idx, beta)


@pytest.mark.parametrize("build", [graphs.relay_topology, graphs.direct_topology, graphs.rear_end_topology])
def test_enumeration_agrees_on_fixed_graphs(build):
    g = build()
    args = (len(g.variables),) + _flatten(g)
    assert cython.enumerate_optimum(*args) == _kernels_py.enumerate_optimum(*args)
