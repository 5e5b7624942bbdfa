"""Max-sum message passing over binary {Stop, Move} factor graphs.

Every agent contributes one variable (its action) and one factor (its
utility).  A factor's utility is its preference ``beta`` for the owner's
action minus one unit for every other scope variable that also chooses
Move while the owner moves.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import _core
from .errors import IncompleteScope, InvalidGraph, MissingEdge, TooLarge

STOP = 0
MOVE = 1
ACTIONS = ("stop", "move")

MAX_BRUTE_FORCE_VARS = 20


@dataclass(frozen=True)
class FactorNode:
    name: str
    owner: str
    scope: tuple[str, ...]
    beta: tuple[float, float]


class FactorGraph:
    """Bipartite graph of action variables and utility factors."""

    def __init__(self, variables: Sequence[str], factors: Sequence[FactorNode]):
        self.variables = tuple(variables)
        self.factors = tuple(factors)
        if len(set(self.variables)) != len(self.variables):
            raise InvalidGraph("duplicate variable names")
        names = [f.name for f in self.factors]
        if len(set(names)) != len(names) or set(names) & set(self.variables):
            raise InvalidGraph("factor names must be unique and distinct from variables")
        var_set = set(self.variables)
        for f in self.factors:
            if len(f.beta) != 2 or not all(math.isfinite(b) for b in f.beta):
                raise InvalidGraph(f"factor {f.name!r}: beta must be two finite values")
            if f.owner not in f.scope:
                raise InvalidGraph(f"factor {f.name!r}: scope must contain its own variable")
            if len(set(f.scope)) != len(f.scope):
                raise InvalidGraph(f"factor {f.name!r}: repeated scope variable")
            unknown = set(f.scope) - var_set
            if unknown:
                raise InvalidGraph(f"factor {f.name!r}: unknown variables {sorted(unknown)}")
        self.factor_by_name = {f.name: f for f in self.factors}
        self.var_factors: dict[str, tuple[str, ...]] = {
            v: tuple(f.name for f in self.factors if v in f.scope) for v in self.variables
        }
        self.edges: tuple[tuple[str, str], ...] = tuple(
            (v, f.name) for f in self.factors for v in f.scope
        )
        self.var_index = {v: i for i, v in enumerate(self.variables)}

    def is_tree(self) -> bool:
        """True when the bipartite graph is a forest."""
        parent = {n: n for n in self.variables + tuple(self.factor_by_name)}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for v, f in self.edges:
            rv, rf = find(v), find(f)
            if rv == rf:
                return False
            parent[rv] = rf
        return True

    def factor(self, name: str) -> FactorNode:
        return self.factor_by_name[name]


@dataclass
class Assignment:
    actions: dict[str, int]
    converged: bool = True
    iterations: int = 0
    marginals: dict[str, tuple[float, float]] = field(default_factory=dict)
    total: float | None = None

    def action_names(self) -> dict[str, str]:
        return {v: ACTIONS[a] for v, a in self.actions.items()}


@dataclass
class MsgTable:
    """Variable->factor (zeta) and factor->variable (gamma) messages."""

    zeta: dict[tuple[str, str], tuple[float, float]]
    gamma: dict[tuple[str, str], tuple[float, float]]
    iteration: int = 0

    @classmethod
    def zeros(cls, graph: FactorGraph) -> "MsgTable":
        return cls({(v, f): (0.0, 0.0) for v, f in graph.edges},
                   {(f, v): (0.0, 0.0) for v, f in graph.edges})


def local_utility(factor: FactorNode, joint: Mapping[str, int]) -> float:
    missing = [v for v in factor.scope if v not in joint]
    if missing:
        raise IncompleteScope(f"factor {factor.name!r} missing actions for {missing}")
    own = joint[factor.owner]
    value = factor.beta[own]
    if own == MOVE:
        value -= sum(1 for v in factor.scope if v != factor.owner and joint[v] == MOVE)
    return float(value)


def total_utility(graph: FactorGraph, actions: Mapping[str, int]) -> float:
    return float(sum(local_utility(f, actions) for f in graph.factors))


def _recentre(values: tuple[float, float]) -> tuple[float, float]:
    shift = 0.5 * (values[0] + values[1])
    return values[0] - shift, values[1] - shift


def msg_var_to_fn(graph: FactorGraph, var: str, fac: str, table: MsgTable) -> tuple[float, float]:
    """Sum of gamma messages from the variable's other factors, recentred to zero-sum."""
    if (var, fac) not in table.zeta:
        raise MissingEdge(f"no edge {var!r} -> {fac!r}")
    stop = move = 0.0
    for other in graph.var_factors[var]:
        if other != fac:
            g = table.gamma[(other, var)]
            stop += g[0]
            move += g[1]
    return _recentre((stop, move))


def _factor_max(factor: FactorNode, var: str, table: MsgTable,
                fixed: Mapping[str, int] | None = None) -> tuple[float, float]:
    fixed = fixed or {}
    others = [v for v in factor.scope if v != var and v not in fixed]
    out = []
    for x in (STOP, MOVE):
        best = -math.inf
        for combo in itertools.product((STOP, MOVE), repeat=len(others)):
            joint = dict(fixed)
            joint[var] = x
            joint.update(zip(others, combo))
            val = local_utility(factor, joint)
            for v, a in zip(others, combo):
                val += table.zeta[(v, factor.name)][a]
            if val > best:
                best = val
        out.append(best)
    return out[0], out[1]


def msg_fn_to_var(graph: FactorGraph, fac: str, var: str, table: MsgTable) -> tuple[float, float]:
    """Max over the factor's other scope variables of utility plus their zeta messages."""
    if (fac, var) not in table.gamma:
        raise MissingEdge(f"no edge {fac!r} -> {var!r}")
    return _factor_max(graph.factor(fac), var, table)


def _dump(trace, k, table: MsgTable):
    for (v, f), m in table.zeta.items():
        trace(f"round={k} edge={v}->{f} stop={m[0]:.12g} move={m[1]:.12g}")
    for (f, v), m in table.gamma.items():
        trace(f"round={k} edge={f}->{v} stop={m[0]:.12g} move={m[1]:.12g}")


def run_maxsum(graph: FactorGraph, max_iters: int = 100, damping: float | None = None,
               tol: float = 1e-9, trace: Callable[[str], None] | None = None) -> Assignment:
    """Synchronous max-sum until messages settle, then decode an assignment.

    ``damping`` defaults to 0 on trees and 0.5 on cyclic graphs.  Rounds
    whose messages did not change are not counted in ``iterations``.
    Decoding walks the variables breadth-first and fixes each one to the
    argmax of its incoming messages conditioned on the variables already
    fixed, preferring Stop on ties.
    """
    if max_iters < 1:
        raise InvalidGraph("max_iters must be >= 1")
    if damping is None:
        damping = 0.0 if graph.is_tree() else 0.5
    if not 0.0 <= damping < 1.0:
        raise InvalidGraph("damping must lie in [0, 1)")
    table = MsgTable.zeros(graph)
    converged = False
    rounds = 0
    for k in range(1, max_iters + 1):
        zeta = {}
        gamma = {}
        for v, f in graph.edges:
            zeta[(v, f)] = msg_var_to_fn(graph, v, f, table)
            gamma[(f, v)] = _recentre(msg_fn_to_var(graph, f, v, table))
        delta = 0.0
        if damping:
            for key, new in zeta.items():
                old = table.zeta[key]
                zeta[key] = _recentre((damping * old[0] + (1 - damping) * new[0],
                                       damping * old[1] + (1 - damping) * new[1]))
            for key, new in gamma.items():
                old = table.gamma[key]
                gamma[key] = _recentre((damping * old[0] + (1 - damping) * new[0],
                                        damping * old[1] + (1 - damping) * new[1]))
        for key, new in zeta.items():
            old = table.zeta[key]
            delta = max(delta, abs(new[0] - old[0]), abs(new[1] - old[1]))
        for key, new in gamma.items():
            old = table.gamma[key]
            delta = max(delta, abs(new[0] - old[0]), abs(new[1] - old[1]))
        if delta < tol:
            converged = True
            break
        table = MsgTable(zeta, gamma, k)
        rounds = k
        if trace is not None:
            _dump(trace, k, table)
    marginals = {}
    for v in graph.variables:
        stop = sum(table.gamma[(f, v)][0] for f in graph.var_factors[v])
        move = sum(table.gamma[(f, v)][1] for f in graph.var_factors[v])
        marginals[v] = (stop, move)
    actions = _decode(graph, table, tol)
    return Assignment(actions, converged, max(rounds, 1), marginals,
                      total_utility(graph, actions))


def _decode(graph: FactorGraph, table: MsgTable, tol: float) -> dict[str, int]:
    order: list[str] = []
    seen: set[str] = set()
    for root in graph.variables:
        if root in seen:
            continue
        seen.add(root)
        queue = [root]
        while queue:
            v = queue.pop(0)
            order.append(v)
            for f in graph.var_factors[v]:
                for w in graph.factor(f).scope:
                    if w not in seen:
                        seen.add(w)
                        queue.append(w)
    fixed: dict[str, int] = {}
    for v in order:
        score = [0.0, 0.0]
        for f in graph.var_factors[v]:
            g = _factor_max(graph.factor(f), v, table, fixed)
            score[0] += g[0]
            score[1] += g[1]
        fixed[v] = MOVE if score[1] > score[0] + tol else STOP
    return {v: fixed[v] for v in graph.variables}


def _flatten(graph: FactorGraph):
    vi = graph.var_index
    owner = np.array([vi[f.owner] for f in graph.factors], dtype=np.int64)
    ptr = np.zeros(len(graph.factors) + 1, dtype=np.int64)
    idx = []
    for i, f in enumerate(graph.factors):
        idx.extend(vi[v] for v in f.scope)
        ptr[i + 1] = len(idx)
    beta = np.array([f.beta for f in graph.factors], dtype=np.float64).reshape(-1, 2)
    return owner, ptr, np.array(idx, dtype=np.int64), beta


def brute_force_optimum(graph: FactorGraph) -> Assignment:
    """Exact maximiser of the summed utilities by enumeration (Stop wins ties)."""
    n = len(graph.variables)
    if n > MAX_BRUTE_FORCE_VARS:
        raise TooLarge(f"{n} variables exceeds the enumeration limit of {MAX_BRUTE_FORCE_VARS}")
    if n == 0:
        return Assignment({}, True, 0, {}, 0.0)
    owner, ptr, idx, beta = _flatten(graph)
    best, state = _core.enumerate_optimum(n, owner, ptr, idx, beta)
    actions = {v: (int(state) >> (n - 1 - i)) & 1 for i, v in enumerate(graph.variables)}
    return Assignment(actions, True, 0, {}, float(best))
