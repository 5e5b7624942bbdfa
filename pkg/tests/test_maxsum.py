import itertools

import pytest
from hypothesis import given, settings, strategies as st

import graphs
from railguard.errors import IncompleteScope, InvalidGraph, MissingEdge, TooLarge
from railguard.maxsum import (
    MOVE,
    STOP,
    FactorGraph,
    FactorNode,
    MsgTable,
    brute_force_optimum,
    local_utility,
    msg_fn_to_var,
    msg_var_to_fn,
    run_maxsum,
    total_utility,
)


def enumerate_all(graph):
    """Plain-Python oracle: (best total, all optimal assignments)."""
    best, arg = None, []
    for combo in itertools.product((STOP, MOVE), repeat=len(graph.variables)):
        joint = dict(zip(graph.variables, combo))
        total = 0.0
        for f in graph.factors:
            own = joint[f.owner]
            total += f.beta[own] - (sum(joint[v] for v in f.scope if v != f.owner) if own == MOVE else 0)
        if best is None or total > best:
            best, arg = total, [joint]
        elif total == best:
            arg.append(joint)
    return best, arg


# -- utility -------------------------------------------------------------------

def test_utility_move_with_stopped_neighbour():
    f = FactorNode("U", "a", ("a", "b"), (-1.0, 1.0))
    assert local_utility(f, {"a": MOVE, "b": STOP}) == 1.0


def test_utility_move_with_two_moving_neighbours():
    f = FactorNode("U", "a", ("a", "b", "c"), (-1.0, 1.0))
    assert local_utility(f, {"a": MOVE, "b": MOVE, "c": MOVE}) == -1.0


@pytest.mark.parametrize("b,c", list(itertools.product((STOP, MOVE), repeat=2)))
def test_utility_stop_never_penalised(b, c):
    f = FactorNode("U", "a", ("a", "b", "c"), (1.0, -1.0))
    assert local_utility(f, {"a": STOP, "b": b, "c": c}) == 1.0


def test_utility_needs_full_scope():
    with pytest.raises(IncompleteScope):
        local_utility(FactorNode("U", "a", ("a", "b"), (0.0, 0.0)), {"a": MOVE})


# -- messages ------------------------------------------------------------------

def chain3():
    # v -- U1 -- (v, w);  v -- U2 -- (v);  v -- U3 -- (v)
    return FactorGraph(["v", "w"], [FactorNode("U1", "v", ("v", "w"), (-1.0, 1.0)),
                                    FactorNode("U2", "w", ("w",), (0.0, 0.0)),
                                    FactorNode("U3", "v", ("v",), (0.0, 0.0))])


def test_var_message_single_factor_is_zero():
    g = FactorGraph(["v"], [FactorNode("U", "v", ("v",), (1.0, 2.0))])
    assert msg_var_to_fn(g, "v", "U", MsgTable.zeros(g)) == (0.0, 0.0)


def test_var_message_one_incoming():
    g = chain3()
    t = MsgTable.zeros(g)
    t.gamma[("U3", "v")] = (2.0, 4.0)
    assert msg_var_to_fn(g, "v", "U1", t) == (-1.0, 1.0)


def test_var_message_two_incoming_cancel():
    g = FactorGraph(["v"], [FactorNode(n, "v", ("v",), (0.0, 0.0)) for n in ("U1", "U2", "U3")])
    t = MsgTable.zeros(g)
    t.gamma[("U2", "v")] = (1.0, 0.0)
    t.gamma[("U3", "v")] = (0.0, 1.0)
    assert msg_var_to_fn(g, "v", "U1", t) == (0.0, 0.0)


def test_missing_edge():
    g = chain3()
    with pytest.raises(MissingEdge):
        msg_var_to_fn(g, "w", "U3", MsgTable.zeros(g))
    with pytest.raises(MissingEdge):
        msg_fn_to_var(g, "U3", "w", MsgTable.zeros(g))


def test_factor_message_single_scope_is_beta():
    g = FactorGraph(["v"], [FactorNode("U", "v", ("v",), (0.5, -2.0))])
    assert msg_fn_to_var(g, "U", "v", MsgTable.zeros(g)) == (0.5, -2.0)


def test_factor_message_pair_zero_zeta():
    g = FactorGraph(["a", "b"], [FactorNode("U", "a", ("a", "b"), (-1.0, 1.0))])
    # a = Stop: utility -1 whatever b does; a = Move: best when b stops, giving 1
    assert msg_fn_to_var(g, "U", "a", MsgTable.zeros(g)) == (-1.0, 1.0)
    # towards b: a always moves (1 when b stops, 0 when b moves)
    assert msg_fn_to_var(g, "U", "b", MsgTable.zeros(g)) == (1.0, 0.0)


@settings(max_examples=100)
@given(st.lists(st.integers(-3, 3), min_size=6, max_size=6), st.sampled_from([(-1.0, 1.0), (1.0, -1.0)]),
       st.sampled_from(["a", "b", "c"]))
def test_factor_message_three_scope_matches_enumeration(zetas, beta, target):
    f = FactorNode("U", "a", ("a", "b", "c"), beta)
    g = FactorGraph(["a", "b", "c"], [f])
    t = MsgTable.zeros(g)
    for k, v in enumerate("abc"):
        t.zeta[(v, "U")] = (float(zetas[2 * k]), float(zetas[2 * k + 1]))
    others = [v for v in "abc" if v != target]
    want = []
    for x in (STOP, MOVE):
        vals = []
        for combo in itertools.product((STOP, MOVE), repeat=2):
            joint = {target: x, **dict(zip(others, combo))}
            vals.append(local_utility(f, joint) + sum(t.zeta[(v, "U")][joint[v]] for v in others))
        want.append(max(vals))
    assert msg_fn_to_var(g, "U", target, t) == tuple(want)


# -- solver ----------------------------------------------------------------------

@pytest.mark.parametrize("build", [graphs.relay_topology, graphs.direct_topology])
def test_three_agent_topologies_reach_enumeration_optimum(build):
    g = build()
    best, optima = enumerate_all(g)
    result = run_maxsum(g)
    assert result.total == best
    assert result.actions in optima


def test_single_variable_prefers_stop():
    g = FactorGraph(["v"], [FactorNode("U", "v", ("v",), (5.0, -5.0))])
    r = run_maxsum(g)
    assert r.actions == {"v": STOP}
    assert r.converged
    assert r.iterations == 1


def test_tie_prefers_stop():
    g = FactorGraph(["v"], [FactorNode("U", "v", ("v",), (0.0, 0.0))])
    assert run_maxsum(g).actions == {"v": STOP}
    assert brute_force_optimum(g).actions == {"v": STOP}


@pytest.mark.parametrize("seed", range(100))
def test_tree_exactness(seed):
    g = graphs.random_tree_graph(seed)
    assert g.is_tree()
    assert run_maxsum(g).total == brute_force_optimum(g).total


def test_brute_force_empty_graph():
    r = brute_force_optimum(FactorGraph([], []))
    assert r.actions == {}
    assert r.total == 0.0


def test_brute_force_rear_end_topology():
    g = graphs.rear_end_topology()
    best, optima = enumerate_all(g)
    r = brute_force_optimum(g)
    assert r.total == best == 0.0
    assert r.actions in optima
    assert sum(r.actions.values()) <= 1


def test_brute_force_too_large():
    n = 21
    names = [f"v{i}" for i in range(n)]
    g = FactorGraph(names, [FactorNode(f"U{i}", v, (v,), (0.0, 0.0)) for i, v in enumerate(names)])
    with pytest.raises(TooLarge):
        brute_force_optimum(g)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_brute_force_matches_python_enumeration(seed):
    g = graphs.random_tree_graph(seed, 1, 8)
    best, optima = enumerate_all(g)
    r = brute_force_optimum(g)
    assert r.total == best
    assert r.actions == min(optima, key=lambda j: tuple(j[v] for v in g.variables))


@pytest.mark.parametrize("b1,b2", list(itertools.product([(-1.0, 1.0), (1.0, -1.0)], repeat=2)))
def test_conflicting_pair_never_both_move(b1, b2):
    # both moving costs 2 in penalties and gains at most 2 in preference
    g = graphs.rear_end_topology((b1, b2))
    r = brute_force_optimum(g)
    assert not (r.actions["v1"] == MOVE and r.actions["v2"] == MOVE)


def run_and_record(g, **kw):
    lines = []
    r = run_maxsum(g, trace=lines.append, **kw)
    return r, lines


@pytest.mark.parametrize("build", [graphs.relay_topology, graphs.direct_topology])
def test_messages_recentred_each_round(build):
    _, lines = run_and_record(build())
    assert lines
    for line in lines:
        fields = dict(kv.split("=", 1) for kv in line.split())
        assert abs(float(fields["stop"]) + float(fields["move"])) < 1e-12


def test_trace_format():
    _, lines = run_and_record(graphs.relay_topology())
    assert lines[0].startswith("round=1 edge=v1->U1 stop=")


@pytest.mark.parametrize("seed", range(20))
def test_extra_iterations_do_not_change_tree_results(seed):
    g = graphs.random_tree_graph(seed)
    a = run_maxsum(g)
    b = run_maxsum(g, max_iters=500)
    assert (a.actions, a.total, a.marginals) == (b.actions, b.total, b.marginals)


def test_deterministic_traces():
    g = graphs.direct_topology()
    first = run_and_record(g)
    for _ in range(5):
        again = run_and_record(g)
        assert again[0].actions == first[0].actions
        assert again[1] == first[1]


def test_graph_validation():
    with pytest.raises(InvalidGraph):
        FactorGraph(["a"], [FactorNode("U", "a", ("b",), (0.0, 0.0))])
    with pytest.raises(InvalidGraph):
        FactorGraph(["a", "b"], [FactorNode("U", "a", ("a", "c"), (0.0, 0.0))])
    with pytest.raises(InvalidGraph):
        FactorGraph(["a"], [FactorNode("U", "a", ("a",), (float("inf"), 0.0))])
    with pytest.raises(InvalidGraph):
        run_maxsum(graphs.relay_topology(), max_iters=0)
    with pytest.raises(InvalidGraph):
        run_maxsum(graphs.relay_topology(), damping=1.0)


def test_total_utility_matches_oracle():
    g = graphs.direct_topology()
    for combo in itertools.product((STOP, MOVE), repeat=3):
        joint = dict(zip(g.variables, combo))
        expected = sum(f.beta[joint[f.owner]] - (sum(joint[v] for v in f.scope if v != f.owner)
                                                  if joint[f.owner] == MOVE else 0) for f in g.factors)
        assert total_utility(g, joint) == expected
