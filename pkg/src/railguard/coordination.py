"""Agent layer: factor graphs built per incident, and how incidents get resolved."""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from .detection import CollisionIncident, IncidentKind, closing_sign, junction_distance
from .errors import InfeasibleResolution, NoRelayInRange, UnknownTrain
from .kinematics import braking_distance, comm_reachable, min_future_gap
from .maxsum import MOVE, STOP, FactorGraph, FactorNode, run_maxsum
from .network import PriorityClass, TrainState, body_to_vertex
from .world import World

__all__ = [
    "AgentKind", "AgentId", "PriorityClass", "ResolutionMode", "DecisionSet", "ResolutionConfig",
    "build_incident_graph", "resolve_incident", "junction_priority_rule", "centralized_resolve",
    "apply_decisions", "joint_action_margin",
]

MOVE_BETA = (-1.0, 1.0)
STOP_BETA = (1.0, -1.0)


class AgentKind(str, enum.Enum):
    TRAIN = "TrainAgent"
    STATION = "StationAgent"
    JUNCTION = "JunctionAgent"


@dataclass(frozen=True, order=True)
class AgentId:
    kind: AgentKind
    index: str


class ResolutionMode(str, enum.Enum):
    MAX_SUM = "maxsum"
    JUNCTION_PRIORITY = "junction-priority"
    CENTRALIZED_RELAY = "centralized-relay"
    UNILATERAL = "unilateral-stop"

    def __str__(self):
        return self.value


@dataclass
class DecisionSet:
    actions: dict[str, int]
    mode: ResolutionMode
    messages_used: int = 0
    safe: bool = True
    unavoidable: bool = False
    overridden: bool = False
    margin: float = math.inf

    def __post_init__(self):
        if self.messages_used < 0:
            raise ValueError("messages_used must be >= 0")

    def describe(self) -> str:
        return ",".join(f"{t}:{'move' if a == MOVE else 'stop'}" for t, a in sorted(self.actions.items()))


@dataclass(frozen=True)
class ResolutionConfig:
    max_iters: int = 100
    damping: float | None = None


def agent_id(world: World, name: str) -> AgentId:
    net = world.network
    if name in net.stations:
        return AgentId(AgentKind.STATION, name)
    if name in net.junctions:
        return AgentId(AgentKind.JUNCTION, name)
    return AgentId(AgentKind.TRAIN, name)


def _beta(world: World, name: str) -> tuple[float, float]:
    if world.has_train(name):
        t = world.train(name)
        if t.beta is not None:
            return tuple(t.beta)
        return MOVE_BETA if (t.speed > 0 and not t.braking) else STOP_BETA
    return STOP_BETA


def _find_relay(world: World, a: TrainState, b: TrainState, preferred: str | None = None) -> str | None:
    net = world.network
    best, best_key = None, None
    for vid in net.vertex_ids:
        r_v = net.vertex(vid).comm_range
        da = body_to_vertex(a, vid, net)
        db = body_to_vertex(b, vid, net)
        if not (comm_reachable(da, a.comm_range, r_v) and comm_reachable(db, b.comm_range, r_v)):
            continue
        key = (vid != preferred, da + db, vid)
        if best_key is None or key < best_key:
            best, best_key = vid, key
    return best


def _graph(world: World, names: list[str], scopes: list[tuple[str, ...]]) -> FactorGraph:
    factors = [FactorNode(f"U[{n}]", n, s, _beta(world, n)) for n, s in zip(names, scopes)]
    return FactorGraph(names, factors)


def build_incident_graph(incident: CollisionIncident, world: World) -> FactorGraph:
    """Factor graph for the agents that negotiate ``incident``.

    Trains within each other's range couple directly; otherwise both
    couple through the nearest station or junction that reaches them.
    A platform incident involves the incoming train and the station only.
    """
    a_id, b_id = incident.trains
    a, b = world.train(a_id), world.train(b_id)
    if incident.kind is IncidentKind.REAR_END_PLATFORM:
        station = incident.vertex
        return _graph(world, [a_id, station], [(a_id, station), (a_id, station)])
    direct = comm_reachable(incident.gap, a.comm_range, b.comm_range)
    if direct and incident.kind is IncidentKind.REAR_END_TRACK:
        return _graph(world, [a_id, b_id], [(a_id, b_id), (a_id, b_id)])
    relay = _find_relay(world, a, b, incident.vertex)
    if direct:
        if relay is None:
            return _graph(world, [a_id, b_id], [(a_id, b_id), (a_id, b_id)])
        return _graph(world, [a_id, relay, b_id],
                      [(a_id, b_id), (a_id, relay, b_id), (a_id, b_id)])
    if relay is None:
        raise NoRelayInRange(f"trains {a_id!r} and {b_id!r} are out of range and no relay covers both")
    return _graph(world, [a_id, relay, b_id],
                  [(a_id, relay), (a_id, relay, b_id), (relay, b_id)])


def _effective(train: TrainState, action: int) -> bool:
    """Whether the train will be braking under ``action``."""
    return train.braking or action == STOP


def joint_action_margin(incident: CollisionIncident, world: World, act_a: int, act_b: int) -> float:
    """Smallest future gap for the incident pair under the given actions."""
    a, b = world.train(incident.trains[0]), world.train(incident.trains[1])
    decel = world.constants.deceleration
    if incident.kind is IncidentKind.HEAD_ON_TRACK:
        sa, sb = closing_sign(a, b, world.network), closing_sign(b, a, world.network)
    elif incident.kind is IncidentKind.HEAD_ON_JUNCTION:
        sa = sb = -1
    else:
        sa, sb = -1, 1
    return min_future_gap(incident.gap, a.speed, _effective(a, act_a), sa,
                          b.speed, _effective(b, act_b), sb, decel)


def _verify(incident: CollisionIncident, world: World, proposed: dict[str, int]) -> DecisionSet:
    """Keep ``proposed`` if it keeps the pair above the critical distance, else fall back."""
    a_id, b_id = incident.trains
    crit = world.critical
    chosen = (proposed.get(a_id, STOP), proposed.get(b_id, STOP))
    margin = joint_action_margin(incident, world, *chosen)
    if margin >= crit:
        return DecisionSet({a_id: chosen[0], b_id: chosen[1]}, ResolutionMode.MAX_SUM, margin=margin)
    options = [(STOP, STOP)] + [c for c in itertools.product((STOP, MOVE), repeat=2) if c != (STOP, STOP)]
    margins = {c: joint_action_margin(incident, world, *c) for c in options}
    safe = [c for c in options if margins[c] >= crit]
    if safe:
        pick = max(safe, key=lambda c: (c == (STOP, STOP), margins[c]))
        return DecisionSet({a_id: pick[0], b_id: pick[1]}, ResolutionMode.MAX_SUM,
                           overridden=True, margin=margins[pick])
    pick = max(options, key=lambda c: (margins[c], c == (STOP, STOP)))
    return DecisionSet({a_id: pick[0], b_id: pick[1]}, ResolutionMode.MAX_SUM, safe=False,
                       unavoidable=True, overridden=pick != chosen, margin=margins[pick])


def _can_stop(world: World, train: TrainState, d: float) -> bool:
    return braking_distance(train.speed, world.constants) <= d


def junction_priority_rule(train_a: TrainState, train_b: TrainState, junction: str,
                           world: World) -> DecisionSet:
    """Decide which of two trains converging on ``junction`` uses it first.

    When both can stop short of the junction the higher priority class goes
    (ties: nearer train, then id).  A train that cannot stop goes first.  If
    neither can stop the collision is flagged as unavoidable.
    """
    net = world.network
    d = {t.id: junction_distance(t, junction, net) for t in (train_a, train_b)}
    can = {t.id: _can_stop(world, t, d[t.id]) for t in (train_a, train_b)}
    msgs = 4
    ids = (train_a.id, train_b.id)
    if not any(can.values()):
        return DecisionSet({i: STOP for i in ids}, ResolutionMode.JUNCTION_PRIORITY, msgs,
                           safe=False, unavoidable=True, margin=-math.inf)
    if all(can.values()):
        braking = [t for t in (train_a, train_b) if t.braking]
        if len(braking) == 2:
            return DecisionSet({i: STOP for i in ids}, ResolutionMode.JUNCTION_PRIORITY, msgs)
        if len(braking) == 1:
            mover = train_b if braking[0] is train_a else train_a
        else:
            mover = max((train_a, train_b), key=lambda t: (t.category, -d[t.id], _neg(t.id)))
    else:
        mover = train_a if not can[train_a.id] else train_b
    stopper = train_b if mover is train_a else train_a
    margin = d[stopper.id] - braking_distance(stopper.speed, world.constants)
    return DecisionSet({mover.id: MOVE, stopper.id: STOP}, ResolutionMode.JUNCTION_PRIORITY, msgs,
                       margin=margin)


def _neg(text: str):
    # reverse lexicographic key so that max() prefers the smaller id
    return tuple(-ord(c) for c in text) + (0,)


def _decide(incident: CollisionIncident, world: World, config: ResolutionConfig) -> DecisionSet:
    if incident.kind is IncidentKind.HEAD_ON_JUNCTION:
        a, b = (world.train(t) for t in incident.trains)
        return junction_priority_rule(a, b, incident.vertex, world)
    try:
        graph = build_incident_graph(incident, world)
    except NoRelayInRange:
        ds = _verify(incident, world, {t: STOP for t in incident.trains})
        ds.mode = ResolutionMode.UNILATERAL
        ds.messages_used = 0
        return ds
    result = run_maxsum(graph, max_iters=config.max_iters, damping=config.damping)
    proposed = {t: result.actions.get(t, STOP) for t in incident.trains}
    if incident.kind is IncidentKind.REAR_END_PLATFORM:
        proposed[incident.trains[1]] = STOP
    ds = _verify(incident, world, proposed)
    ds.messages_used = 2 * len(graph.edges) * result.iterations
    return ds


def resolve_incident(incident: CollisionIncident, world: World,
                     config: ResolutionConfig = ResolutionConfig()) -> DecisionSet:
    """Distributed resolution; raises :class:`InfeasibleResolution` when no action is safe.

    Junction conflicts never raise: an unavoidable junction collision is
    returned as a DecisionSet flagged ``unavoidable``.
    """
    ds = _decide(incident, world, config)
    if ds.unavoidable and incident.kind is not IncidentKind.HEAD_ON_JUNCTION:
        raise InfeasibleResolution(f"no safe joint action for {incident.trains}", ds)
    return ds


def centralized_messages(incident: CollisionIncident) -> int:
    # each train reports to the monitoring station and receives its decision;
    # a junction involved in the conflict reports and is acknowledged as well
    n = len(incident.trains) + (1 if incident.kind is IncidentKind.HEAD_ON_JUNCTION else 0)
    return 2 * n


def centralized_resolve(incident: CollisionIncident, world: World,
                        config: ResolutionConfig = ResolutionConfig()) -> DecisionSet:
    """Station-computed resolution with star-shaped message accounting."""
    ds = _decide(incident, world, config)
    ds.mode = ResolutionMode.CENTRALIZED_RELAY
    ds.messages_used = centralized_messages(incident)
    if ds.unavoidable and incident.kind is not IncidentKind.HEAD_ON_JUNCTION:
        raise InfeasibleResolution(f"no safe joint action for {incident.trains}", ds)
    return ds


def apply_decisions(world: World, decisions: Iterable[DecisionSet] | Mapping[str, int]) -> World:
    """Stop puts a train into braking; Move leaves it unchanged.  Stop wins conflicts."""
    if isinstance(decisions, Mapping):
        merged = dict(decisions)
    else:
        merged = {}
        for ds in decisions:
            for tid, act in ds.actions.items():
                merged[tid] = min(merged.get(tid, MOVE), act)
    for tid in merged:
        if not world.has_train(tid):
            raise UnknownTrain(tid)
    trains = []
    for t in world.trains:
        if merged.get(t.id) == STOP and t.speed > 0 and not t.braking:
            t = replace(t, braking=True)
        trains.append(t)
    return world.with_trains(trains)
