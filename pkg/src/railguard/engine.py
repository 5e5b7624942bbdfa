"""Deterministic time-stepped simulation: advance, detect, resolve, classify."""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .coordination import (
    DecisionSet,
    ResolutionConfig,
    apply_decisions,
    centralized_resolve,
    resolve_incident,
)
from .detection import (
    ALL_AGENTS,
    CollisionIncident,
    IncidentKind,
    closing_sign,
    is_ahead,
    junction_distance,
    scan_all,
)
from .errors import InfeasibleResolution, ValidationError
from .kinematics import DEFAULT_CONSTANTS, KinematicConstants, braking_distance, displacement, safe_stop_check
from .maxsum import STOP
from .network import (
    DOWN,
    UP,
    RailNetwork,
    TrainState,
    ahead_vertex,
    body_gap,
    body_touches_vertex,
    remaining_on_track,
    validate_occupancy,
)
from .world import World

log = logging.getLogger("railguard.engine")

CONTACT_EPS = 1e-9


class Mode(str, enum.Enum):
    DISTRIBUTED = "distributed"
    CENTRALIZED = "centralized"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Scenario:
    """Everything one simulation needs: the network with its starting trains plus run settings."""

    network: RailNetwork
    trains: tuple[TrainState, ...]
    constants: KinematicConstants = DEFAULT_CONSTANTS
    headway: float = 200.0
    critical: float = 100.0
    default_range: float = 200.0
    tick: float = 1.0
    horizon: int = 86_400
    mode: Mode = Mode.DISTRIBUTED
    seed: int = 0
    latency: int = 0
    agents: frozenset = ALL_AGENTS
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "trains", tuple(self.trains))
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "agents", frozenset(self.agents))
        if not self.tick > 0:
            raise ValidationError("tick must be > 0")
        if self.horizon < 1:
            raise ValidationError("horizon must be >= 1")
        if not self.critical > 0:
            raise ValidationError("critical distance must be > 0")
        if not self.headway > self.critical:
            raise ValidationError("headway must exceed the critical distance")
        if not self.default_range > 0:
            raise ValidationError("default communication range must be > 0")
        if self.latency < 0:
            raise ValidationError("latency must be >= 0 ticks")
        ids = [t.id for t in self.trains]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate train id")
        for t in self.trains:
            _check_route(t, self.network)
        validate_occupancy(self.network, [t for t in self.trains if t.activation_tick <= 0])

    def with_mode(self, mode) -> "Scenario":
        return replace(self, mode=Mode(mode))


def _check_route(train: TrainState, network: RailNetwork) -> None:
    if train.track not in network.tracks:
        raise ValidationError(f"train {train.id!r}: unknown track {train.track!r}")
    vertex = ahead_vertex(train, network)
    for tid in train.route:
        track = network.tracks.get(tid)
        if track is None:
            raise ValidationError(f"train {train.id!r}: route names unknown track {tid!r}")
        if vertex not in (track.u, track.v):
            raise ValidationError(f"train {train.id!r}: route track {tid!r} does not start at {vertex!r}")
        vertex = track.other_end(vertex)


@dataclass
class IncidentRecord:
    id: int
    incident: CollisionIncident
    tick_detected: int
    safe_at_detection: bool
    decision: DecisionSet | None = None
    outcome: str | None = None
    tick_closed: int | None = None

    @property
    def kind(self) -> IncidentKind:
        return self.incident.kind

    @property
    def trains(self) -> tuple[str, str]:
        return self.incident.trains

    @property
    def pair(self) -> frozenset:
        return self.incident.pair


@dataclass
class SimReport:
    detected: int
    avoided: int
    occurred: int
    range_messages: int
    polling_messages: int
    resolution_messages: int
    events: list[str]
    incidents: list[IncidentRecord]
    final_world: World
    mode: Mode
    n_trains: int
    ticks_run: int
    truncated: bool = False

    def __post_init__(self):
        if min(self.detected, self.avoided, self.occurred) < 0:
            raise ValueError("counts must be >= 0")
        if self.avoided + self.occurred != self.detected:
            raise ValueError("avoided + occurred must equal detected")

    @property
    def messages_total(self) -> int:
        return self.range_messages + self.polling_messages + self.resolution_messages

    @property
    def all_detections_safe(self) -> bool:
        return all(r.safe_at_detection for r in self.incidents)

    def event_log(self) -> str:
        return "".join(line + "\n" for line in self.events)


@dataclass
class EngineState:
    """Mutable bookkeeping carried between ticks."""

    open: dict = field(default_factory=dict)
    closed: list = field(default_factory=list)
    wrecked_pairs: set = field(default_factory=set)
    in_range: set = field(default_factory=set)
    pending: list = field(default_factory=list)
    waiting: list = field(default_factory=list)
    holds: dict = field(default_factory=dict)
    pinned: set = field(default_factory=set)
    cruise: dict = field(default_factory=dict)
    next_id: int = 1
    range_messages: int = 0
    polling_messages: int = 0
    resolution_messages: int = 0


def _fmt_gap(gap: float) -> str:
    return "inf" if math.isinf(gap) else f"{gap:.3f}"


def _event(tick, kind, rec: IncidentRecord, gap, mode, msgs=0, extra=""):
    a, b = rec.trains
    line = (f"tick={tick} event={kind} kind={rec.kind.value} trains={a},{b} "
            f"gap={_fmt_gap(gap)} mode={mode} msgs={msgs}")
    return line + extra


# -- kinematics ------------------------------------------------------------

def _moved(t: TrainState, track: str, pos: float, direction: int, route: tuple,
           speed: float, braking: bool) -> TrainState:
    # positional construction; dataclasses.replace dominates the tick cost otherwise
    return TrainState(t.id, track, pos, speed, direction, t.length, t.comm_range, t.category,
                      t.index, t.platform, route, braking, t.activation_tick, t.beta, t.wrecked)


def _place_after(train: TrainState, dist: float, net: RailNetwork, speed: float,
                 braking: bool) -> TrainState:
    """Move the tip ``dist`` metres forward, following the route across vertices.

    A train that runs out of route at the end of its track halts there.
    """
    track, pos, direction, route = net.tracks[train.track], train.position, train.direction, train.route
    while True:
        rem = track.length - pos if direction == UP else pos
        if dist <= rem:
            pos = pos + dist if direction == UP else pos - dist
            break
        if not route:
            pos = track.length if direction == UP else 0.0
            return _moved(train, track.id, pos, direction, route, 0.0, False)
        dist -= rem
        vertex = track.v if direction == UP else track.u
        track = net.tracks[route[0]]
        route = route[1:]
        direction = UP if track.u == vertex else DOWN
        pos = 0.0 if direction == UP else track.length
    if speed == 0.0:
        braking = False
    return _moved(train, track.id, pos, direction, route, speed, braking)


def advance_train(train: TrainState, dt: float, net: RailNetwork,
                  constants: KinematicConstants = DEFAULT_CONSTANTS) -> TrainState:
    """One tick of motion: constant speed, or exact braking down to standstill.

    A train without a further route starts braking once another tick at
    full speed would leave it less than its braking distance from the end
    of its track.
    """
    if train.speed <= 0 or train.wrecked:
        return train
    decel = constants.deceleration
    braking = train.braking
    if not braking and not train.route:
        if remaining_on_track(train, net) - train.speed * dt <= braking_distance(train.speed, constants):
            braking = True
    dist = displacement(train.speed, braking, dt, decel)
    speed = max(0.0, train.speed - decel * dt) if braking else train.speed
    return _place_after(train, dist, net, speed, braking)


def _dock(before: tuple[TrainState, ...], after: list[TrainState], net: RailNetwork) -> list[TrainState]:
    """Trains that came to rest on a platform approach with no onward route join that platform.

    The platform may already be occupied; later arrivals queue behind the
    standing train and are protected by the station in the same way.
    """
    out = []
    for old, t in zip(before, after):
        if old.speed > 0 and t.speed == 0 and not t.route and t.platform is None and not t.wrecked:
            sid = ahead_vertex(t, net)
            station = net.stations.get(sid)
            if station is not None:
                p = station.platform_for_track(t.track)
                if p is not None and remaining_on_track(t, net) <= station.comm_range:
                    t = replace(t, platform=(sid, p))
        out.append(t)
    return out


def advance(world: World) -> World:
    net = world.network
    moved = [advance_train(t, world.dt, net, world.constants) for t in world.trains]
    if any(a.speed > 0 and b.speed == 0 for a, b in zip(world.trains, moved)):
        moved = _dock(world.trains, moved, net)
    return world.with_trains(moved, tick=world.tick + 1)


# -- incident bookkeeping ---------------------------------------------------

def safe_at_detection(incident: CollisionIncident, world: World) -> bool:
    """Whether braking at detection keeps the pair at least the critical distance apart."""
    a, b = world.train(incident.trains[0]), world.train(incident.trains[1])
    c = world.constants
    da, db = braking_distance(a.speed, c), braking_distance(b.speed, c)
    kind = incident.kind
    if kind is IncidentKind.HEAD_ON_TRACK:
        return safe_stop_check(incident.gap, da, db, world.critical)
    if kind is IncidentKind.REAR_END_TRACK:
        return safe_stop_check(incident.gap + db, da, 0.0, world.critical)
    if kind is IncidentKind.REAR_END_PLATFORM:
        return safe_stop_check(incident.gap, da, 0.0, world.critical)
    j = incident.vertex
    return da <= junction_distance(a, j, world.network) or db <= junction_distance(b, j, world.network)


def _closing(a: TrainState, b: TrainState, world: World) -> bool:
    if a.track != b.track:
        return False
    net = world.network
    rate = (a.speed if closing_sign(a, b, net) < 0 else -a.speed) + \
           (b.speed if closing_sign(b, a, net) < 0 else -b.speed)
    return rate > 0


def _cleared(rec: IncidentRecord, world: World, gap: float) -> bool:
    a, b = world.train(rec.trains[0]), world.train(rec.trains[1])
    kind = rec.kind
    if kind is IncidentKind.REAR_END_PLATFORM:
        return a.speed == 0
    if kind is IncidentKind.HEAD_ON_JUNCTION:
        r = world.network.junctions[rec.incident.vertex].comm_range
        return all(t.speed == 0 or junction_distance(t, rec.incident.vertex, world.network) > r
                   for t in (a, b))
    if a.speed == 0 and b.speed == 0:
        return True
    return gap >= world.headway and not _closing(a, b, world)


def _contact_kind(a: TrainState, b: TrainState) -> IncidentKind:
    if a.track != b.track:
        return IncidentKind.HEAD_ON_JUNCTION
    if a.direction != b.direction:
        return IncidentKind.HEAD_ON_TRACK
    if a.platform is not None or b.platform is not None:
        return IncidentKind.REAR_END_PLATFORM
    return IncidentKind.REAR_END_TRACK


def _contacts(world: World, gaps: np.ndarray) -> list[tuple[int, int, str | None]]:
    """Index pairs of trains that touch: same-track overlap or a shared junction."""
    trains = world.trains
    net = world.network
    out = []
    m = len(trains)
    if m < 2:
        return out
    ii, jj = np.nonzero(np.triu(gaps <= CONTACT_EPS, 1))
    for i, j in zip(ii.tolist(), jj.tolist()):
        a, b = trains[i], trains[j]
        if a.track == b.track:
            out.append((i, j, None))
            continue
        shared = {net.tracks[a.track].u, net.tracks[a.track].v} & \
            {net.tracks[b.track].u, net.tracks[b.track].v}
        for vid in sorted(shared):
            if vid in net.junctions and body_touches_vertex(a, vid, net) \
                    and body_touches_vertex(b, vid, net):
                out.append((i, j, vid))
                break
    return out


# -- the tick ---------------------------------------------------------------

@dataclass(frozen=True)
class StepConfig:
    mode: Mode = Mode.DISTRIBUTED
    latency: int = 0
    agents: frozenset = ALL_AGENTS
    resolution: ResolutionConfig = ResolutionConfig()


def _resolver(mode: Mode) -> Callable:
    return centralized_resolve if mode is Mode.CENTRALIZED else resolve_incident


def step(world: World, config: StepConfig = StepConfig(),
         state: EngineState | None = None) -> tuple[World, list[str]]:
    """Run one tick: detect, resolve in severity order, apply, advance, classify.

    ``state`` carries open incidents between calls; a fresh one is used when
    omitted.  Returns the next world and this tick's event lines.
    """
    state = state if state is not None else EngineState()
    mode = Mode(config.mode)
    events: list[str] = []
    tick = world.tick

    if mode is Mode.CENTRALIZED:
        state.polling_messages += 2 * (len(world.trains) + world.network.n_junctions)
    else:
        gaps = world.geometry()
        state.range_messages += 2 * _range_entries(world, gaps, state)

    world = _apply_due(world, state, tick)

    busy = set(state.open) | state.wrecked_pairs
    resolve = _resolver(mode)
    for inc in scan_all(world, config.agents, exclude_pairs=busy):
        rec = IncidentRecord(state.next_id, inc, tick, safe_at_detection(inc, world))
        state.next_id += 1
        state.open[inc.pair] = rec
        events.append(_event(tick, "detected", rec, inc.gap, mode))
        try:
            ds = resolve(inc, world, config.resolution)
        except InfeasibleResolution as exc:
            ds = exc.decisions
        rec.decision = ds
        _hold(state, rec, ds, world)
        state.resolution_messages += ds.messages_used
        events.append(_event(
            tick, "resolved", rec, inc.gap, mode, ds.messages_used,
            f" resolution={ds.mode.value} actions={ds.describe()} "
            f"safe={'true' if ds.safe else 'false'} id={rec.id}"))
        if config.latency == 0:
            world = apply_decisions(world, [ds])
        else:
            state.pending.append((tick + config.latency, ds))

    world = advance(world)
    gaps = world.geometry()
    world = _classify(world, gaps, state, events, mode, tick)
    world = _release(world, state)
    return world, events


# kinds after which a halted train may continue once the conflict has cleared
_RELEASABLE = frozenset({IncidentKind.REAR_END_TRACK, IncidentKind.HEAD_ON_JUNCTION})


def _hold(state: EngineState, rec: IncidentRecord, ds: DecisionSet, world: World) -> None:
    for tid, act in ds.actions.items():
        if act != STOP or not world.has_train(tid):
            continue
        t = world.train(tid)
        if t.speed == 0 and not t.braking:
            continue
        state.cruise.setdefault(tid, t.speed)
        state.holds.setdefault(tid, set()).add(rec.id)
        if rec.kind not in _RELEASABLE:
            state.pinned.add(tid)


def _blocked(train: TrainState, speed: float, world: World) -> bool:
    """Whether restarting at ``speed`` would run straight into another conflict.

    Any train within the headway plus the braking distance counts, unless
    it is behind on the same track; so does traffic at the junction ahead.
    """
    net = world.network
    reach = world.headway + braking_distance(speed, world.constants)
    for other in world.trains:
        if other.id == train.id:
            continue
        if other.track == train.track and is_ahead(train, other, net):
            continue
        if body_gap(train, other, net) < reach:
            return True
    ahead = ahead_vertex(train, net)
    junction = net.junctions.get(ahead)
    if junction is not None:
        for other in world.trains:
            if other.id != train.id and other.speed > 0 and \
                    junction_distance(other, ahead, net) <= junction.comm_range:
                return True
    return False


def _release(world: World, state: EngineState) -> World:
    """Halted trains whose conflicts have all cleared continue at their cruise speed."""
    if not state.holds:
        return world
    open_ids = {rec.id for rec in state.open.values()}
    changed = {}
    for tid in sorted(state.holds):
        held = state.holds[tid]
        held &= open_ids
        t = world.train(tid)
        if held or t.speed > 0 or t.braking:
            continue
        del state.holds[tid]
        if tid in state.pinned or t.wrecked or t.platform is not None:
            continue
        if _blocked(t, state.cruise[tid], world):
            state.holds[tid] = set()
            continue
        changed[tid] = replace(t, speed=state.cruise.pop(tid))
    if not changed:
        return world
    return world.with_trains([changed.get(t.id, t) for t in world.trains])


def _range_entries(world: World, gaps: np.ndarray, state: EngineState) -> int:
    trains = world.trains
    m = len(trains)
    if m < 2:
        state.in_range = set()
        return 0
    radius = np.array([t.comm_range for t in trains])
    within = np.triu(gaps <= radius[:, None] + radius[None, :], 1)
    ii, jj = np.nonzero(within)
    now = {frozenset((trains[i].id, trains[j].id)) for i, j in zip(ii.tolist(), jj.tolist())}
    entered = len(now - state.in_range)
    state.in_range = now
    return entered


def _apply_due(world: World, state: EngineState, tick: int) -> World:
    if not state.pending:
        return world
    due = [ds for t, ds in state.pending if t <= tick]
    state.pending = [(t, ds) for t, ds in state.pending if t > tick]
    for ds in due:
        live = {k: v for k, v in ds.actions.items() if world.has_train(k)}
        world = apply_decisions(world, live)
    return world


def _classify(world: World, gaps: np.ndarray, state: EngineState, events: list[str],
              mode: Mode, tick: int) -> World:
    index = {t.id: i for i, t in enumerate(world.trains)}
    wrecked: set[str] = set()
    for i, j, vertex in _contacts(world, gaps):
        a, b = world.trains[i], world.trains[j]
        pair = frozenset((a.id, b.id))
        if pair in state.wrecked_pairs:
            continue
        state.wrecked_pairs.add(pair)
        wrecked.update(pair)
        rec = state.open.pop(pair, None)
        if rec is None:
            ids = tuple(sorted(pair))
            inc = CollisionIncident(_contact_kind(a, b), ids, 0.0, 0.0, vertex=vertex)
            rec = IncidentRecord(state.next_id, inc, tick, False)
            state.next_id += 1
            events.append(_event(tick, "detected", rec, 0.0, mode))
        rec.outcome, rec.tick_closed = "occurred", tick
        state.closed.append(rec)
        events.append(_event(tick, "occurred", rec, 0.0, mode))
    if wrecked:
        trains = [replace(t, speed=0.0, braking=False, wrecked=True) if t.id in wrecked else t
                  for t in world.trains]
        world = world.with_trains(trains)
    for pair in sorted(state.open, key=lambda p: state.open[p].id):
        rec = state.open[pair]
        a, b = rec.trains
        gap = float(gaps[index[a], index[b]])
        if _cleared(rec, world, gap):
            del state.open[pair]
            rec.outcome, rec.tick_closed = "avoided", tick
            state.closed.append(rec)
            events.append(_event(tick, "avoided", rec, gap, mode))
    return world


def _frozen(world: World, state: EngineState) -> bool:
    return not state.waiting and not state.pending and not state.open \
        and all(t.speed == 0 for t in world.trains)


def _entry_clear(train: TrainState, trains: list[TrainState], net: RailNetwork) -> bool:
    if train.platform is not None and any(o.platform == train.platform for o in trains):
        return False
    same = [replace(o, platform=None) for o in trains if o.track == train.track]
    try:
        validate_occupancy(net, same + [train])
    except ValidationError:
        return False
    return True


class Simulation:
    """Iterates :func:`step` over a scenario's horizon."""

    def __init__(self, scenario: Scenario, trace: Callable[[str], None] | None = None,
                 stop_on_unsafe: bool = False):
        self.scenario = scenario
        self.config = StepConfig(scenario.mode, scenario.latency, scenario.agents)
        self.state = EngineState()
        self.state.waiting = sorted((t for t in scenario.trains if t.activation_tick > 0),
                                    key=lambda t: (t.activation_tick, t.id))
        start = [t for t in scenario.trains if t.activation_tick <= 0]
        self.world = World(scenario.network, tuple(start), 0, scenario.headway, scenario.critical,
                           scenario.constants, scenario.tick)
        self.events: list[str] = []
        self.trace = trace
        self.stop_on_unsafe = stop_on_unsafe

    def _activate(self) -> None:
        st = self.state
        if not st.waiting or st.waiting[0].activation_tick > self.world.tick:
            return
        trains = list(self.world.trains)
        still = []
        for t in st.waiting:
            if t.activation_tick > self.world.tick:
                still.append(t)
                continue
            if not _entry_clear(t, trains, self.world.network):
                still.append(t)  # entry blocked; retry next tick
                continue
            trains.append(t)
        st.waiting = still
        self.world = self.world.with_trains(trains)

    def run(self) -> SimReport:
        sc = self.scenario
        ticks = 0
        truncated = False
        for _ in range(sc.horizon):
            self._activate()
            self.world, ev = step(self.world, self.config, self.state)
            ticks += 1
            if self.trace is not None:
                for line in ev:
                    self.trace(line)
            self.events.extend(ev)
            if self.stop_on_unsafe and not self._all_safe():
                truncated = True
                break
            if _frozen(self.world, self.state):
                break
        remaining = 0 if truncated else sc.horizon - ticks
        if remaining and self.config.mode is Mode.CENTRALIZED:
            per_tick = 2 * (len(self.world.trains) + self.world.network.n_junctions)
            self.state.polling_messages += per_tick * remaining
        end = self.world.tick
        for pair in sorted(self.state.open, key=lambda p: self.state.open[p].id):
            rec = self.state.open.pop(pair)
            rec.outcome, rec.tick_closed = "avoided", end
            self.state.closed.append(rec)
            a, b = rec.trains
            gap = float(self.world.geometry()[self._idx(a), self._idx(b)])
            self.events.append(_event(end, "avoided", rec, gap, self.config.mode))
        records = sorted(self.state.closed, key=lambda r: r.id)
        occurred = sum(1 for r in records if r.outcome == "occurred")
        return SimReport(
            detected=len(records),
            avoided=len(records) - occurred,
            occurred=occurred,
            range_messages=self.state.range_messages,
            polling_messages=self.state.polling_messages,
            resolution_messages=self.state.resolution_messages,
            events=self.events,
            incidents=records,
            final_world=self.world,
            mode=self.config.mode,
            n_trains=len(sc.trains),
            ticks_run=ticks,
            truncated=truncated,
        )

    def _all_safe(self) -> bool:
        return all(r.safe_at_detection for r in self.state.open.values()) and \
            all(r.safe_at_detection for r in self.state.closed)

    def _idx(self, train_id: str) -> int:
        return next(i for i, t in enumerate(self.world.trains) if t.id == train_id)


def run_scenario(scenario: Scenario, trace: Callable[[str], None] | None = None,
                 stop_on_unsafe: bool = False) -> SimReport:
    """Simulate ``scenario`` to its horizon (or until nothing can change).

    With ``stop_on_unsafe`` the run ends early, flagged ``truncated``, as
    soon as an incident is detected too late to stop safely.
    """
    return Simulation(scenario, trace, stop_on_unsafe).run()
