"""Collision-threat predicates and the per-tick severity-ordered scan."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .kinematics import braking_distance, distance_to_junction
from .errors import Unreachable
from .network import (
    DOWN,
    UP,
    RailNetwork,
    TrainState,
    ahead_vertex,
    body_gap,
    body_interval,
    body_to_vertex,
    body_touches_vertex,
    remaining_on_track,
)
from .world import World


class IncidentKind(str, enum.Enum):
    HEAD_ON_TRACK = "HeadOnTrack"
    HEAD_ON_JUNCTION = "HeadOnJunction"
    REAR_END_TRACK = "RearEndTrack"
    REAR_END_PLATFORM = "RearEndPlatform"

    @property
    def fatality(self) -> int:
        return 2 if self in (IncidentKind.HEAD_ON_TRACK, IncidentKind.HEAD_ON_JUNCTION) else 1

    @property
    def head_on(self) -> bool:
        return self.fatality == 2

    def __str__(self):
        return self.value


ALL_AGENTS = frozenset({"train", "station", "junction"})
TRAIN_PAIRS_ONLY = frozenset({"train"})


@dataclass(frozen=True)
class CollisionIncident:
    """A detected threat between two trains.

    For rear-end kinds ``trains`` is ``(follower, leader)``; for platform
    incidents ``(incoming, standing)``.  ``vertex`` names the station or
    junction involved, if any.
    """

    kind: IncidentKind
    trains: tuple[str, str]
    gap: float
    time_to_collision: float
    vertex: str | None = None
    severity_rank: int = 0

    def __post_init__(self):
        if self.trains[0] == self.trains[1]:
            raise ValueError("incident participants must be distinct")
        if self.gap < 0:
            raise ValueError("gap must be >= 0")

    @property
    def immediate(self) -> bool:
        return self.time_to_collision <= 0.0

    @property
    def pair(self) -> frozenset[str]:
        return frozenset(self.trains)

    def sort_key(self):
        return (-self.kind.fatality, self.time_to_collision, tuple(sorted(self.trains)), self.kind.value)


def _ttc(gap: float, closing: float) -> float:
    if gap <= 0:
        return 0.0
    if closing <= 0:
        return math.inf
    return gap / closing


def is_ahead(leader: TrainState, follower: TrainState, network: RailNetwork) -> bool:
    """Whether ``leader`` lies ahead of ``follower`` in the follower's direction (same track)."""
    if follower.direction == UP:
        return leader.position > follower.position
    return leader.position < follower.position


def closing_sign(mover: TrainState, other: TrainState, network: RailNetwork) -> int:
    """-1 if ``mover`` travelling forward shrinks its gap to ``other``, else +1."""
    if mover.track == other.track:
        return -1 if is_ahead(other, mover, network) else 1
    return -1


def detect_head_on_track(a: TrainState, b: TrainState, network: RailNetwork,
                         headway: float) -> CollisionIncident | None:
    if a.track != b.track:
        return None
    if (a.direction ^ b.direction) != 1:
        return None
    if not (a.speed > 0 or b.speed > 0):
        return None
    gap = body_gap(a, b, network)
    if not gap < headway:
        return None
    closing = (a.speed if closing_sign(a, b, network) < 0 else -a.speed) + \
              (b.speed if closing_sign(b, a, network) < 0 else -b.speed)
    pair = tuple(sorted((a.id, b.id)))
    return CollisionIncident(IncidentKind.HEAD_ON_TRACK, pair, gap, _ttc(gap, closing))


def detect_rear_end_track(a: TrainState, b: TrainState, network: RailNetwork,
                          headway: float) -> CollisionIncident | None:
    if a.track != b.track or a.direction != b.direction:
        return None
    if is_ahead(b, a, network):
        follower, leader = a, b
    elif is_ahead(a, b, network):
        follower, leader = b, a
    else:
        return None
    if not (follower.speed > leader.speed > 0):
        return None
    gap = body_gap(a, b, network)
    if not gap < headway:
        return None
    return CollisionIncident(IncidentKind.REAR_END_TRACK, (follower.id, leader.id), gap,
                             _ttc(gap, follower.speed - leader.speed))


def detect_rear_end_platform(station: str, standing: TrainState, incoming: TrainState,
                             network: RailNetwork) -> CollisionIncident | None:
    if standing.platform is None or standing.platform[0] != station:
        return None
    if incoming.track != standing.track:
        return None
    if not (standing.speed == 0 and incoming.speed > 0):
        return None
    if not is_ahead(standing, incoming, network):
        return None
    gap = body_gap(standing, incoming, network)
    return CollisionIncident(IncidentKind.REAR_END_PLATFORM, (incoming.id, standing.id), gap,
                             _ttc(gap, incoming.speed), vertex=station)


def junction_distance(train: TrainState, junction: str, network: RailNetwork) -> float:
    """Distance ahead to the junction; 0 while the body still covers it."""
    if body_touches_vertex(train, junction, network):
        return 0.0
    try:
        return distance_to_junction(train, junction, network)
    except Unreachable:
        return math.inf


def _outbound(train: TrainState, junction: str, network: RailNetwork) -> str | None:
    if ahead_vertex(train, network) == junction and train.route:
        return train.route[0]
    return None


def _routes_disjoint(a: TrainState, b: TrainState, junction: str, network: RailNetwork) -> bool:
    out_a, out_b = _outbound(a, junction, network), _outbound(b, junction, network)
    if out_a is None or out_b is None:
        return False
    return len({a.track, out_a} & {b.track, out_b}) == 0


def detect_head_on_junction(junction: str, approaching_trains: Sequence[TrainState],
                            network: RailNetwork) -> list[CollisionIncident]:
    """One incident per conflicting pair of trains converging on ``junction``."""
    r = network.junctions[junction].comm_range
    dists = {t.id: junction_distance(t, junction, network) for t in approaching_trains}
    inside = [t for t in approaching_trains if dists[t.id] <= r]
    if len(inside) <= 1:
        return []
    out = []
    for i, a in enumerate(inside):
        for b in inside[i + 1:]:
            if a.track == b.track:
                continue
            if not (a.speed > 0 and b.speed > 0):
                continue
            if _routes_disjoint(a, b, junction, network):
                continue
            gap = body_gap(a, b, network)
            pair = tuple(sorted((a.id, b.id)))
            out.append(CollisionIncident(IncidentKind.HEAD_ON_JUNCTION, pair, gap,
                                         _ttc(gap, a.speed + b.speed), vertex=junction))
    return out


def _dedupe_and_rank(incidents: Iterable[CollisionIncident]) -> list[CollisionIncident]:
    best: dict[frozenset, CollisionIncident] = {}
    for inc in incidents:
        cur = best.get(inc.pair)
        if cur is None or inc.sort_key() < cur.sort_key():
            best[inc.pair] = inc
    ordered = sorted(best.values(), key=CollisionIncident.sort_key)
    return [replace(inc, severity_rank=k + 1) for k, inc in enumerate(ordered)]


def scan_all(world: World, agents: Iterable[str] = ALL_AGENTS,
             exclude_pairs: Iterable[frozenset] = ()) -> list[CollisionIncident]:
    """Evaluate every predicate over the world; most severe incident first.

    ``agents`` selects which agent kinds take part in detection: ``train``
    (pairwise track checks), ``station`` (platform checks) and ``junction``.
    A station raises a platform conflict for an incoming train inside its
    range once the gap to the standing train drops below the headway plus
    the incoming train's braking distance.
    Pairs listed in ``exclude_pairs`` are skipped (already under resolution).
    """
    agents = frozenset(agents)
    net = world.network
    excluded = set(exclude_pairs)
    live = list(world.trains)
    found: list[CollisionIncident] = []
    by_track: dict[str, list[TrainState]] = {}
    for t in live:
        by_track.setdefault(t.track, []).append(t)

    for group in by_track.values():
        if len(group) < 2:
            continue
        for i, a in enumerate(group):
            for b in group[i + 1:]:
                if frozenset((a.id, b.id)) in excluded:
                    continue
                if "train" in agents:
                    inc = detect_head_on_track(a, b, net, world.headway) or \
                        detect_rear_end_track(a, b, net, world.headway)
                    if inc is not None:
                        found.append(inc)
                if "station" in agents:
                    for standing, incoming in ((a, b), (b, a)):
                        if standing.platform is None:
                            continue
                        sid = standing.platform[0]
                        if body_to_vertex(incoming, sid, net) > net.stations[sid].comm_range:
                            continue
                        inc = detect_rear_end_platform(sid, standing, incoming, net)
                        if inc is not None and inc.gap < world.headway + \
                                braking_distance(incoming.speed, world.constants):
                            found.append(inc)

    if "junction" in agents and net.junctions and len(live) >= 2:
        for jid, cands in _junction_candidates(world).items():
            for inc in detect_head_on_junction(jid, cands, net):
                if inc.pair not in excluded:
                    found.append(inc)
    return _dedupe_and_rank(found)


def _junction_candidates(world: World) -> dict[str, list[TrainState]]:
    """Moving trains within each junction's range, keyed by junction id."""
    net = world.network
    track, lo, hi, pos, up, speed = world.layout
    rows = np.flatnonzero(speed > 0)
    if len(rows) < 2:
        return {}
    tr = track[rows]
    length = net.track_len[tr]
    tu, tv = net.track_u[tr], net.track_v[tr]
    ahead = np.where(up[rows], tv, tu)
    rem = np.where(up[rows], length - pos[rows], pos[rows])
    first = net.n_stations
    cols = np.arange(first, net.n_vertices)
    dmat = net.dist[np.ix_(ahead, cols)] + rem[:, None]
    k = np.arange(len(rows))
    touch_u = (lo[rows] <= 1e-9) & (tu >= first)
    touch_v = (hi[rows] >= length - 1e-9) & (tv >= first)
    dmat[k[touch_u], tu[touch_u] - first] = 0.0
    dmat[k[touch_v], tv[touch_v] - first] = 0.0
    near = dmat <= net.junction_range[None, :]
    out = {}
    jids = net.vertex_ids[first:]
    for c in np.flatnonzero(near.sum(axis=0) >= 2):
        out[jids[c]] = [world.trains[rows[i]] for i in np.flatnonzero(near[:, c])]
    return out
