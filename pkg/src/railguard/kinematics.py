"""Distance and speed arithmetic: braking, headway gaps, range checks."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DisconnectedTracks, NegativeSpeed, Unreachable, ValidationError
from .network import (
    RailNetwork,
    TrainState,
    ahead_vertex,
    body_gap,
    remaining_on_track,
)

KMH = 1000.0 / 3600.0


@dataclass(frozen=True)
class KinematicConstants:
    mu_k: float = 0.42
    g: float = 9.81

    def __post_init__(self):
        if not (self.mu_k > 0 and self.g > 0):
            raise ValidationError("mu_k and g must be positive")

    @property
    def deceleration(self) -> float:
        return self.mu_k * self.g


DEFAULT_CONSTANTS = KinematicConstants()


@dataclass(frozen=True)
class GapReport:
    gap: float
    headway: float
    critical: float

    def __post_init__(self):
        if self.gap < 0:
            raise ValidationError("gap must be >= 0")
        if not self.critical < self.headway:
            raise ValidationError("critical distance must be below the headway")

    @property
    def violates_headway(self) -> bool:
        return self.gap < self.headway


def kmh_to_ms(v: float) -> float:
    return v * 1000.0 / 3600.0


def braking_distance(speed: float, constants: KinematicConstants = DEFAULT_CONSTANTS) -> float:
    """Distance to standstill under full braking: v^2 / (2 mu_k g)."""
    if speed < 0:
        raise NegativeSpeed(f"speed must be >= 0, got {speed}")
    return speed * speed / (2.0 * constants.mu_k * constants.g)


def headway_gap(train_a: TrainState, train_b: TrainState, network: RailNetwork,
                headway: float = 200.0, critical: float = 100.0) -> GapReport:
    gap = body_gap(train_a, train_b, network)
    if math.isinf(gap):
        raise DisconnectedTracks(f"no path between {train_a.track!r} and {train_b.track!r}")
    return GapReport(gap, headway, critical)


def comm_reachable(gap: float, r_a: float, r_b: float) -> bool:
    return gap <= r_a + r_b


def safe_stop_check(gap: float, brake_a: float, brake_b: float, critical: float) -> bool:
    """True when both trains braking now still leave at least ``critical`` metres."""
    return gap - (brake_a + brake_b) >= critical


def distance_to_junction(train: TrainState, junction: str, network: RailNetwork) -> float:
    """Distance from the train's tip to ``junction`` along its direction of travel."""
    track = network.tracks[train.track]
    if junction in (track.u, track.v) and train.position == track.offset_of(junction):
        return 0.0
    rem = remaining_on_track(train, network)
    ahead = ahead_vertex(train, network)
    d = rem + network.vertex_distance(ahead, junction)
    if math.isinf(d):
        raise Unreachable(f"junction {junction!r} unreachable from train {train.id!r}")
    return d


def latency_braking_error(speed: float, latency: float,
                          constants: KinematicConstants = DEFAULT_CONSTANTS) -> float:
    """Relative growth of the stopping distance when braking starts ``latency`` s late."""
    db = braking_distance(speed, constants)
    if db == 0:
        return 0.0
    return speed * latency / db


def displacement(speed: float, braking: bool, t: float, decel: float) -> float:
    if not braking:
        return speed * t
    t_stop = speed / decel
    if t >= t_stop:
        return speed * speed / (2.0 * decel)
    return speed * t - 0.5 * decel * t * t


def min_future_gap(gap: float, speed_a: float, brake_a: bool, sign_a: int,
                   speed_b: float, brake_b: bool, sign_b: int, decel: float) -> float:
    """Smallest gap over all future time for two trains on a common line.

    ``sign`` is -1 when the train's motion closes the gap and +1 when it
    opens it.  A braking train decelerates at ``decel`` until standstill; a
    non-braking train holds its speed.  Returns ``-inf`` when the gap closes
    without bound.
    """
    breaks = sorted({0.0}
                    | ({speed_a / decel} if brake_a and speed_a > 0 else set())
                    | ({speed_b / decel} if brake_b and speed_b > 0 else set()))

    def coeffs(speed, braking, sign, t_mid):
        # gap contribution c1*t + c2*t^2 (+ const) on the piece containing t_mid
        if braking:
            if t_mid < speed / decel:
                return 0.0, sign * speed, sign * -0.5 * decel
            return sign * speed * speed / (2 * decel), 0.0, 0.0
        return 0.0, sign * speed, 0.0

    best = gap
    for i, t0 in enumerate(breaks):
        t1 = breaks[i + 1] if i + 1 < len(breaks) else math.inf
        t_mid = t0 + 1.0 if math.isinf(t1) else 0.5 * (t0 + t1)
        ca = coeffs(speed_a, brake_a, sign_a, t_mid)
        cb = coeffs(speed_b, brake_b, sign_b, t_mid)
        c0, c1, c2 = gap + ca[0] + cb[0], ca[1] + cb[1], ca[2] + cb[2]

        def f(t):
            return c0 + c1 * t + c2 * t * t

        if math.isinf(t1):
            if c2 < 0 or (c2 == 0 and c1 < 0):
                return -math.inf
            best = min(best, f(t0))
            continue
        best = min(best, f(t0), f(t1))
        if c2 > 0:
            tv = -c1 / (2 * c2)
            if t0 < tv < t1:
                best = min(best, f(tv))
    return best
