"""Seeded scenario generation for sweeps and the safety corpus.

Train ``k`` of a sweep is drawn from its own random stream keyed by
``(seed, k)`` and placed given trains ``0..k-1`` only, so the scenario
with ``m`` trains is a prefix of the one with ``m + 2``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np

from .engine import Mode, Scenario, SimReport, run_scenario
from .errors import ValidationError
from .kinematics import kmh_to_ms
from .network import DOWN, UP, Junction, PriorityClass, RailNetwork, Station, Track, TrainState, build_network
from .network import body_gap, validate_occupancy

N_STATIONS = 12
N_JUNCTIONS = 10
MIN_SPEED_KMH = 40.0
MAX_SPEED_KMH = 220.0
STANDING_SHARE = 0.15
MAX_ROUTE_HOPS = 6
INITIAL_SPACING = 200.0  # no pair starts inside the default headway


@dataclass(frozen=True)
class Profile:
    """How trains are drawn.

    ``directional`` runs every train in its track's UP direction.
    ``speed_band`` (km/h), when set, draws all of a scenario's moving
    trains from one band of that width placed uniformly inside the speed
    range.  ``station_routes`` redraws trains whose route cannot end at a
    station.
    """

    directional: bool = False
    speed_band: float | None = None
    station_routes: bool = False


MIXED = Profile()
SAFE_CORPUS = Profile(directional=True, speed_band=15.0, station_routes=True)
TWO_WAY_BANDED = Profile(directional=False, speed_band=15.0, station_routes=True)
# every fourth corpus slot runs both directions so same-track head-ons appear
CORPUS_PROFILES = (SAFE_CORPUS, SAFE_CORPUS, SAFE_CORPUS, TWO_WAY_BANDED)


def base_network(seed: int = 2024) -> RailNetwork:
    """Fixed network: a ring of junctions with two chords, stations on spurs.

    Stations S1..S10 hang off junctions J1..J10 through two parallel
    platform tracks each; S11 and S12 are through stations between pairs
    of junctions.  Track lengths are drawn once from 2 to 6 km.  Every
    track is oriented so that its UP direction is the preferred running
    direction: inbound platform tracks (``a``) end at their station and
    outbound ones (``b``) start there.
    """
    rng = np.random.default_rng(seed)

    def length() -> float:
        return float(round(rng.uniform(2000.0, 6000.0), 1))

    junctions = [Junction(f"J{i}") for i in range(1, N_JUNCTIONS + 1)]
    tracks: list[Track] = []
    for i in range(1, N_JUNCTIONS + 1):
        nxt = i % N_JUNCTIONS + 1
        tracks.append(Track(f"R{i}", f"J{i}", f"J{nxt}", length()))
    tracks.append(Track("C1", "J1", "J6", length()))
    tracks.append(Track("C2", "J3", "J8", length()))
    stations = []
    for i in range(1, N_JUNCTIONS + 1):
        spur = length()
        a, b = f"P{i}a", f"P{i}b"
        tracks.append(Track(a, f"J{i}", f"S{i}", spur))
        tracks.append(Track(b, f"S{i}", f"J{i}", spur))
        stations.append(Station(f"S{i}", platforms=((1, a), (2, b))))
    for sid, (ja, jb) in (("S11", ("J2", "J7")), ("S12", ("J4", "J9"))):
        a, b = f"{sid}a", f"{sid}b"
        tracks.append(Track(a, ja, sid, length()))
        tracks.append(Track(b, sid, jb, length()))
        stations.append(Station(sid, platforms=((1, a), (2, b))))
    return build_network(stations + junctions, tracks)


def _random_route(rng: np.random.Generator, net: RailNetwork, track: Track, direction: int,
                  directional: bool = False) -> tuple[str, ...]:
    """Random walk from the vertex ahead, trimmed to end on a track into a station.

    With ``directional`` the walk only takes tracks in their UP direction.
    """
    vertex = track.v if direction == UP else track.u
    current = track.id
    route: list[str] = []
    arrivals: list[str] = []
    for _ in range(MAX_ROUTE_HOPS):
        if vertex in net.stations:
            break
        options = [t for t in net.adjacency[vertex] if t != current
                   and (not directional or net.tracks[t].u == vertex)]
        if not options:
            break
        nxt = options[int(rng.integers(len(options)))]
        route.append(nxt)
        current = nxt
        vertex = net.tracks[nxt].other_end(vertex)
        arrivals.append(vertex)
    while route and arrivals[-1] not in net.stations:
        route.pop()
        arrivals.pop()
    return tuple(route)


def _band(seed: int, profile: Profile) -> tuple[float, float]:
    if profile.speed_band is None:
        return MIN_SPEED_KMH, MAX_SPEED_KMH
    lo = float(np.random.default_rng([seed, 1 << 30]).uniform(MIN_SPEED_KMH, MAX_SPEED_KMH - profile.speed_band))
    return lo, lo + profile.speed_band


def draw_train(seed: int, k: int, net: RailNetwork, placed: list[TrainState],
               profile: Profile = MIXED, attempts: int = 200) -> TrainState:
    """Train ``k`` for ``seed``, placed clear of ``placed``."""
    rng = np.random.default_rng([seed, k])
    track_ids = net.track_ids
    categories = list(PriorityClass)
    vmin, vmax = _band(seed, profile)
    directional = profile.directional
    tid = f"T{k + 1}"
    for _ in range(attempts):
        track = net.tracks[track_ids[int(rng.integers(len(track_ids)))]]
        category = categories[int(rng.integers(len(categories)))]
        ends = (track.v,) if directional else (track.u, track.v)
        station_end = [(p, s) for s in ends if s in net.stations
                       for p in [net.stations[s].platform_for_track(track.id)] if p is not None]
        if station_end and rng.random() < STANDING_SHARE:
            p, sid = station_end[0]
            direction = UP if sid == track.v else DOWN
            pos = track.length if direction == UP else 0.0
            cand = TrainState(tid, track.id, pos, 0.0, direction, category=category, index=k,
                              platform=(sid, p))
        else:
            direction = UP if directional or rng.random() < 0.5 else DOWN
            pos = float(round(rng.uniform(200.0, track.length - 200.0), 1))
            speed = kmh_to_ms(float(rng.uniform(vmin, vmax)))
            route = _random_route(rng, net, track, direction, directional)
            last = track.v if direction == UP else track.u
            for hop in route:
                last = net.tracks[hop].other_end(last)
            if profile.station_routes and last not in net.stations:
                continue
            cand = TrainState(tid, track.id, pos, speed, direction, category=category, index=k,
                              route=route)
        try:
            validate_occupancy(net, placed + [cand])
        except ValidationError:
            continue
        if any(o.track == cand.track and body_gap(o, cand, net) < INITIAL_SPACING for o in placed):
            continue
        return cand
    raise ValidationError(f"could not place train {tid} after {attempts} attempts")


def train_sequence(seed: int, count: int, net: RailNetwork, profile: Profile = MIXED) -> list[TrainState]:
    placed: list[TrainState] = []
    for k in range(count):
        placed.append(draw_train(seed, k, net, placed, profile))
    return placed


def sweep_scenario(base: Scenario, n_trains: int, seed: int, mode=None,
                   profile: Profile = MIXED) -> Scenario:
    """``base`` with its trains replaced by the first ``n_trains`` of the seeded sequence."""
    trains = train_sequence(seed, n_trains, base.network, profile)
    return replace(base, trains=tuple(trains), seed=seed,
                   mode=Mode(mode) if mode is not None else base.mode,
                   name=f"{base.name}-m{n_trains}-s{seed}")


def default_base(horizon: int = 600) -> Scenario:
    return Scenario(base_network(), (), horizon=horizon, name="sweep")


def corpus(count: int, seed: int = 0, min_trains: int = 2, max_trains: int = 30,
           horizon: int = 300, profile: Profile = MIXED) -> Iterator[Scenario]:
    """``count`` generated scenarios with train counts uniform in the given range."""
    base = default_base(horizon)
    rng = np.random.default_rng(seed)
    for i in range(count):
        m = int(rng.integers(min_trains, max_trains + 1))
        yield sweep_scenario(base, m, seed * 1_000_003 + i, profile=profile)


def safety_corpus(size: int = 500, seed: int = 0, min_trains: int = 2, max_trains: int = 30,
                  horizon: int = 180, max_attempts: int = 400,
                  profiles: tuple[Profile, ...] = CORPUS_PROFILES) -> list[tuple[Scenario, SimReport]]:
    """Scenarios in which every incident was detected while both trains could still stop.

    Train counts cycle through ``min_trains..max_trains`` and generation
    profiles through ``profiles``; each slot keeps drawing fresh seeds
    until a run has only safe detections.  Returns the accepted scenarios
    with their reports.
    """
    base = default_base(horizon)
    counts = list(range(min_trains, max_trains + 1))
    out = []
    attempt = 0
    for i in range(size):
        m = counts[i % len(counts)]
        profile = profiles[i % len(profiles)]
        for _ in range(max_attempts):
            attempt += 1
            sc = sweep_scenario(base, m, seed * 10_000_019 + attempt, profile=profile)
            report = run_scenario(sc, stop_on_unsafe=True)
            if not report.truncated:
                out.append((sc, report))
                break
        else:
            raise ValidationError(f"no all-safe scenario with {m} trains in {max_attempts} attempts")
    return out
