"""Railway network model and immutable train snapshots.

Positions are 1-D offsets along a track measured from the track's origin
endpoint ``u``.  A train's ``position`` is its tip (front end); its body
extends ``length`` metres behind the tip with respect to its direction of
travel and is clipped to the track it is on.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np

from .errors import (
    DanglingEndpoint,
    DuplicateId,
    LoopTrack,
    NonPositiveLength,
    OverlapConflict,
    PlatformConflict,
    UnknownAgent,
    ValidationError,
)

UP = 1
DOWN = 0

DEFAULT_TRAIN_LENGTH = 200.0
DEFAULT_COMM_RANGE = 200.0


class PriorityClass(enum.IntEnum):
    """Train categories; larger value means higher priority."""

    FREIGHT = 1
    PASSENGER = 2
    EXPRESS_MAIL = 3
    SUPERFAST_EXPRESS = 4
    PREMIUM = 5

    @classmethod
    def parse(cls, text: str | "PriorityClass") -> "PriorityClass":
        if isinstance(text, PriorityClass):
            return text
        key = str(text).strip().upper().replace("-", "_").replace(" ", "_")
        aliases = {
            "SUPERFASTEXPRESS": "SUPERFAST_EXPRESS",
            "SUPERFAST": "SUPERFAST_EXPRESS",
            "EXPRESSMAIL": "EXPRESS_MAIL",
            "EXPRESS": "EXPRESS_MAIL",
            "MAIL": "EXPRESS_MAIL",
        }
        key = aliases.get(key, key)
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown priority class {text!r}") from None


@dataclass(frozen=True)
class Track:
    id: str
    u: str
    v: str
    length: float
    index: int = 0

    def other_end(self, vertex: str) -> str:
        return self.v if vertex == self.u else self.u

    def offset_of(self, vertex: str) -> float:
        """Offset along the track of one of its endpoints."""
        if vertex == self.u:
            return 0.0
        if vertex == self.v:
            return self.length
        raise DanglingEndpoint(f"vertex {vertex!r} is not an endpoint of track {self.id!r}")


@dataclass(frozen=True)
class Station:
    id: str
    index: int = 0
    platforms: tuple[tuple[int, str], ...] = ()
    comm_range: float = 3000.0

    def platform_track(self, p: int) -> str:
        for number, track in self.platforms:
            if number == p:
                return track
        raise KeyError(f"station {self.id!r} has no platform {p}")

    def platform_for_track(self, track: str) -> int | None:
        for number, t in self.platforms:
            if t == track:
                return number
        return None


@dataclass(frozen=True)
class Junction:
    id: str
    index: int = 0
    tracks: tuple[str, ...] = ()
    comm_range: float = 1000.0


Vertex = Station | Junction


@dataclass(frozen=True, slots=True)
class TrainState:
    id: str
    track: str
    position: float
    speed: float = 0.0
    direction: int = UP
    length: float = DEFAULT_TRAIN_LENGTH
    comm_range: float = DEFAULT_COMM_RANGE
    category: PriorityClass = PriorityClass.PASSENGER
    index: int = 0
    platform: tuple[str, int] | None = None
    route: tuple[str, ...] = ()
    braking: bool = False
    activation_tick: int = 0
    beta: tuple[float, float] | None = None
    wrecked: bool = False

    @property
    def moving(self) -> bool:
        return self.speed > 0.0


class RailNetwork:
    """Validated, immutable multigraph whose edges are tracks."""

    def __init__(self, stations: Sequence[Station], junctions: Sequence[Junction],
                 tracks: Sequence[Track]):
        self.stations: dict[str, Station] = {s.id: s for s in stations}
        self.junctions: dict[str, Junction] = {j.id: j for j in junctions}
        self.tracks: dict[str, Track] = {t.id: t for t in tracks}
        self.vertex_ids: tuple[str, ...] = tuple(s.id for s in stations) + tuple(j.id for j in junctions)
        self.track_ids: tuple[str, ...] = tuple(t.id for t in tracks)
        self.vertex_index = {v: i for i, v in enumerate(self.vertex_ids)}
        self.track_index = {t: i for i, t in enumerate(self.track_ids)}
        adjacency: dict[str, list[str]] = {v: [] for v in self.vertex_ids}
        for t in tracks:
            adjacency[t.u].append(t.id)
            adjacency[t.v].append(t.id)
        self.adjacency: dict[str, tuple[str, ...]] = {v: tuple(ts) for v, ts in adjacency.items()}
        self.dist = self._all_pairs()
        # array views for the compiled kernels
        self.track_u = np.array([self.vertex_index[t.u] for t in tracks], dtype=np.int64)
        self.track_v = np.array([self.vertex_index[t.v] for t in tracks], dtype=np.int64)
        self.track_len = np.array([t.length for t in tracks], dtype=np.float64)
        self.junction_range = np.array([j.comm_range for j in junctions], dtype=np.float64)
        self.neighbour_tracks = {
            t.id: frozenset(self.adjacency[t.u]) | frozenset(self.adjacency[t.v]) for t in tracks
        }

    def _all_pairs(self) -> np.ndarray:
        g = nx.MultiGraph()
        g.add_nodes_from(self.vertex_ids)
        for t in self.tracks.values():
            g.add_edge(t.u, t.v, key=t.id, weight=t.length)
        n = len(self.vertex_ids)
        dist = np.full((n, n), np.inf)
        for src, lengths in nx.all_pairs_dijkstra_path_length(g, weight="weight"):
            i = self.vertex_index[src]
            for dst, d in lengths.items():
                dist[i, self.vertex_index[dst]] = d
        return dist

    # -- counts -----------------------------------------------------------
    @property
    def n_stations(self) -> int:
        return len(self.stations)

    @property
    def n_junctions(self) -> int:
        return len(self.junctions)

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_ids)

    def is_vertex(self, vid: str) -> bool:
        return vid in self.vertex_index

    def vertex(self, vid: str) -> Vertex:
        if vid in self.stations:
            return self.stations[vid]
        if vid in self.junctions:
            return self.junctions[vid]
        raise UnknownAgent(vid)

    def vertex_distance(self, a: str, b: str) -> float:
        return float(self.dist[self.vertex_index[a], self.vertex_index[b]])

    def shared_vertex(self, track_a: str, track_b: str) -> str | None:
        ta, tb = self.tracks[track_a], self.tracks[track_b]
        for v in (ta.u, ta.v):
            if v in (tb.u, tb.v):
                return v
        return None

    def __repr__(self) -> str:
        return (f"RailNetwork(stations={self.n_stations}, junctions={self.n_junctions}, "
                f"tracks={len(self.tracks)})")


def build_network(vertices: Iterable[Vertex], tracks: Iterable[Track]) -> RailNetwork:
    """Validate vertices and tracks and assemble a :class:`RailNetwork`.

    Junction ``tracks`` are recomputed from the edge list so adjacency and
    the junction records always agree.
    """
    vertices = list(vertices)
    tracks = list(tracks)
    seen: set[str] = set()
    for v in vertices:
        if v.id in seen:
            raise DuplicateId(f"duplicate vertex id {v.id!r}")
        seen.add(v.id)
        if v.comm_range <= 0:
            raise ValidationError(f"vertex {v.id!r}: comm_range must be > 0")
    track_seen: set[str] = set()
    for t in tracks:
        if t.id in track_seen or t.id in seen:
            raise DuplicateId(f"duplicate track id {t.id!r}")
        track_seen.add(t.id)
        for end in (t.u, t.v):
            if end not in seen:
                raise DanglingEndpoint(f"track {t.id!r} references unknown vertex {end!r}")
        if t.u == t.v:
            raise LoopTrack(f"track {t.id!r} is a self-loop at {t.u!r}")
        if not (t.length > 0 and math.isfinite(t.length)):
            raise NonPositiveLength(f"track {t.id!r} has non-positive length {t.length!r}")
    tracks = [Track(t.id, t.u, t.v, float(t.length), index=i) for i, t in enumerate(tracks)]
    by_id = {t.id: t for t in tracks}
    incident: dict[str, list[str]] = {v.id: [] for v in vertices}
    for t in tracks:
        incident[t.u].append(t.id)
        incident[t.v].append(t.id)

    stations, junctions = [], []
    for v in vertices:
        if isinstance(v, Station):
            numbers = [p for p, _ in v.platforms]
            if len(set(numbers)) != len(numbers):
                raise DuplicateId(f"station {v.id!r} has duplicate platform numbers")
            for p, tid in v.platforms:
                if tid not in by_id:
                    raise DanglingEndpoint(f"station {v.id!r} platform {p} references unknown track {tid!r}")
                if v.id not in (by_id[tid].u, by_id[tid].v):
                    raise ValidationError(f"station {v.id!r} platform {p}: track {tid!r} does not end at the station")
            stations.append(Station(v.id, len(stations), tuple(v.platforms), float(v.comm_range)))
        elif isinstance(v, Junction):
            if len(incident[v.id]) < 2:
                raise ValidationError(f"junction {v.id!r} needs at least 2 incident tracks")
            junctions.append(Junction(v.id, len(junctions), tuple(incident[v.id]), float(v.comm_range)))
        else:
            raise ValidationError(f"unsupported vertex {v!r}")
    return RailNetwork(stations, junctions, tracks)


# -- geometry ---------------------------------------------------------------

def body_interval(train: TrainState, network: RailNetwork) -> tuple[float, float]:
    """Occupied [lo, hi] offsets of the train body on its current track."""
    length = network.tracks[train.track].length
    if train.direction == UP:
        lo, hi = train.position - train.length, train.position
    else:
        lo, hi = train.position, train.position + train.length
    return max(lo, 0.0), min(hi, length)


def ahead_vertex(train: TrainState, network: RailNetwork) -> str:
    t = network.tracks[train.track]
    return t.v if train.direction == UP else t.u


def behind_vertex(train: TrainState, network: RailNetwork) -> str:
    t = network.tracks[train.track]
    return t.u if train.direction == UP else t.v


def remaining_on_track(train: TrainState, network: RailNetwork) -> float:
    t = network.tracks[train.track]
    return t.length - train.position if train.direction == UP else train.position


def _end_distances(lo: float, hi: float, track: Track) -> tuple[float, float]:
    return lo, track.length - hi


def body_gap(a: TrainState, b: TrainState, network: RailNetwork) -> float:
    """Shortest along-track separation between two train bodies (0 on overlap)."""
    la, ha = body_interval(a, network)
    lb, hb = body_interval(b, network)
    if a.track == b.track:
        return max(0.0, lb - ha, la - hb)
    ta, tb = network.tracks[a.track], network.tracks[b.track]
    da = _end_distances(la, ha, ta)
    db = _end_distances(lb, hb, tb)
    vi = network.vertex_index
    ends_a = (vi[ta.u], vi[ta.v])
    ends_b = (vi[tb.u], vi[tb.v])
    best = math.inf
    for i in range(2):
        for k in range(2):
            d = da[i] + network.dist[ends_a[i], ends_b[k]] + db[k]
            if d < best:
                best = d
    return float(best)


def body_to_vertex(train: TrainState, vertex: str, network: RailNetwork) -> float:
    lo, hi = body_interval(train, network)
    t = network.tracks[train.track]
    vi = network.vertex_index
    k = vi[vertex]
    return float(min(lo + network.dist[vi[t.u], k], (t.length - hi) + network.dist[vi[t.v], k]))


def body_touches_vertex(train: TrainState, vertex: str, network: RailNetwork) -> bool:
    t = network.tracks[train.track]
    if vertex not in (t.u, t.v):
        return False
    lo, hi = body_interval(train, network)
    return (lo <= 1e-9) if vertex == t.u else (hi >= t.length - 1e-9)


def agent_distance(network: RailNetwork, trains: Mapping[str, TrainState], a: str, b: str) -> float:
    """Along-track separation between two agents (trains or vertices)."""
    a_train, b_train = a in trains, b in trains
    if a_train and b_train:
        return body_gap(trains[a], trains[b], network)
    if a_train and network.is_vertex(b):
        return body_to_vertex(trains[a], b, network)
    if b_train and network.is_vertex(a):
        return body_to_vertex(trains[b], a, network)
    if network.is_vertex(a) and network.is_vertex(b):
        return network.vertex_distance(a, b)
    missing = a if not (a_train or network.is_vertex(a)) else b
    raise UnknownAgent(missing)


def neighbors_in_range(network: RailNetwork, trains: Mapping[str, TrainState] | Sequence[TrainState],
                       agent: str, radius_sum: float) -> list[str]:
    """All agents within ``radius_sum`` metres of ``agent`` along the rails."""
    if not isinstance(trains, Mapping):
        trains = {t.id: t for t in trains}
    if agent not in trains and not network.is_vertex(agent):
        raise UnknownAgent(agent)
    if radius_sum <= 0:
        raise ValueError("radius_sum must be > 0")
    out = []
    for other in list(trains) + list(network.vertex_ids):
        if other == agent:
            continue
        if agent_distance(network, trains, agent, other) <= radius_sum:
            out.append(other)
    return out


def validate_occupancy(network: RailNetwork, trains: Sequence[TrainState]) -> None:
    """Raise if two trains share a platform slot or physically overlap."""
    slots: dict[tuple[str, int], str] = {}
    for tr in trains:
        if tr.track not in network.tracks:
            raise DanglingEndpoint(f"train {tr.id!r} references unknown track {tr.track!r}")
        length = network.tracks[tr.track].length
        if not (0.0 <= tr.position <= length):
            raise ValidationError(f"train {tr.id!r}: position {tr.position} outside [0, {length}]")
        if tr.speed < 0:
            raise ValidationError(f"train {tr.id!r}: negative speed")
        if tr.platform is not None:
            sid, p = tr.platform
            if sid not in network.stations:
                raise DanglingEndpoint(f"train {tr.id!r} references unknown station {sid!r}")
            if network.stations[sid].platform_track(p) != tr.track:
                raise ValidationError(f"train {tr.id!r}: platform {p} of {sid!r} is not on track {tr.track!r}")
            if tr.speed != 0:
                raise ValidationError(f"train {tr.id!r} stands at a platform but has speed {tr.speed}")
            if (sid, p) in slots:
                raise PlatformConflict(f"trains {slots[(sid, p)]!r} and {tr.id!r} both at {sid} platform {p}")
            slots[(sid, p)] = tr.id
    by_track: dict[str, list[TrainState]] = {}
    for tr in trains:
        by_track.setdefault(tr.track, []).append(tr)
    for group in by_track.values():
        spans = sorted((body_interval(t, network), t.id) for t in group)
        reach, reach_id = -math.inf, None
        for (lo, hi), tid in spans:
            if lo <= reach:
                raise OverlapConflict(f"trains {reach_id!r} and {tid!r} overlap on the same track")
            if hi > reach:
                reach, reach_id = hi, tid
