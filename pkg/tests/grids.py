"""Exhaustive parameter grids for the four detection predicates.

Each ``*_cases`` generator yields ``(params, detected, expected)`` where
``detected`` is the predicate's verdict and ``expected`` is the plain
conjunction of the textbook conditions evaluated on the raw parameters.
"""
import itertools

from railguard.detection import (
    detect_head_on_junction,
    detect_head_on_track,
    detect_rear_end_platform,
    detect_rear_end_track,
)
from railguard.network import DOWN, UP, Junction, Station, Track, TrainState, build_network

TRACK_LEN = 10000.0
SPEEDS = (0.0, 1e-9, 5.0, 10.0, 20.0, 30.0, 61.0)
GAPS = (0.0, 1.0, 99.0, 149.999, 150.0, 150.001, 199.999, 200.0, 200.001, 250.0, 400.0, 2000.0)
HEADWAYS = (150.0, 200.0)


def _two_tracks():
    return build_network([Station("A"), Station("B"), Station("C")],
                         [Track("t1", "A", "B", TRACK_LEN), Track("t2", "B", "C", TRACK_LEN)])


def _body(tid, track, lo, hi, direction, speed, **kw):
    """TrainState whose body spans [lo, hi] on ``track``."""
    pos = hi if direction == UP else lo
    return TrainState(tid, track, pos, speed, direction, length=hi - lo, **kw)


def _pair(same_track, gap, a_low, da, db, va, vb, length=100.0):
    """Two trains; on a shared track, A's body lies below B's when ``a_low``."""
    base = 4000.0
    low = (base - length, base)
    high = (base + gap, base + gap + length)
    if not same_track:
        a = _body("A", "t1", *low, da, va)
        b = _body("B", "t2", *low, db, vb)
        return a, b
    (la, ha), (lb, hb) = (low, high) if a_low else (high, low)
    return _body("A", "t1", la, ha, da, va), _body("B", "t1", lb, hb, db, vb)


def head_on_track_cases():
    net = _two_tracks()
    for same, a_low, da, db, va, vb, gap, hw in itertools.product(
            (True, False), (True, False), (UP, DOWN), (UP, DOWN), SPEEDS, SPEEDS, GAPS, HEADWAYS):
        a, b = _pair(same, gap, a_low, da, db, va, vb)
        got = detect_head_on_track(a, b, net, hw) is not None
        # same track, directions differ (XOR), someone moving, gap below headway
        want = same and (da ^ db) == 1 and (va > 0 or vb > 0) and gap < hw
        yield (same, a_low, da, db, va, vb, gap, hw), got, want


def rear_end_track_cases():
    net = _two_tracks()
    for same, a_low, da, db, va, vb, gap, hw in itertools.product(
            (True, False), (True, False), (UP, DOWN), (UP, DOWN), SPEEDS, SPEEDS, GAPS, HEADWAYS):
        a, b = _pair(same, gap, a_low, da, db, va, vb)
        inc = detect_rear_end_track(a, b, net, hw)
        got = inc is not None
        want = False
        if same and da == db:  # XNOR of the direction bits
            # the follower is the train behind in the common direction of travel
            a_behind = a_low if da == UP else not a_low
            v_follow, v_lead = (va, vb) if a_behind else (vb, va)
            want = v_follow > v_lead > 0 and gap < hw
            if got:
                assert inc.trains == (("A", "B") if a_behind else ("B", "A"))
        yield (same, a_low, da, db, va, vb, gap, hw), got, want


def _platform_net():
    # S3 has platform 2 on track p2 (J -> S3); p3 is another platform track of S3
    return build_network([Station("S3", platforms=((2, "p2"), (3, "p3"))), Station("S9", platforms=((1, "q"),)),
                          Station("E"), Junction("J")],
                         [Track("p2", "J", "S3", TRACK_LEN), Track("p3", "J", "S3", TRACK_LEN),
                          Track("q", "J", "S9", TRACK_LEN), Track("e", "E", "J", TRACK_LEN)])


def rear_end_platform_cases():
    net = _platform_net()
    slots = (("S3", 2), ("S9", 1), None)
    standing_speeds = (0.0, 1e-9, 5.0, 20.0)
    incoming_speeds = (0.0, 1e-9, 5.0, 15.0, 25.0, 61.0)
    for slot, inc_track, vs, vi, toward, gap, length in itertools.product(
            slots, ("p2", "p3"), standing_speeds, incoming_speeds, (True, False), GAPS, (50.0, 200.0, 400.0)):
        # standing train at the station end of p2, incoming behind it on inc_track
        standing = _body("T1", "p2", TRACK_LEN - 200.0, TRACK_LEN, UP, vs, platform=slot)
        hi = TRACK_LEN - 200.0 - gap
        incoming = _body("T2", inc_track, hi - length, hi, UP if toward else DOWN, vi)
        station = slot[0] if slot else "S3"
        got = detect_rear_end_platform(station, standing, incoming, net) is not None
        # occupied slot of this station, same track, standing still, incoming
        # moving and heading for the platform
        want = (slot is not None and slot[0] == station and inc_track == "p2"
                and vs == 0 and vi > 0 and toward)
        yield (slot, inc_track, vs, vi, toward, gap, length), got, want


def _cross_net(r):
    tracks = [Track(k, f"S{k}", "X", TRACK_LEN) for k in "ab"]
    return build_network([Station("Sa"), Station("Sb"), Junction("X", comm_range=r)], tracks)


JUNCTION_DISTANCES = (0.0, 50.0, 500.0, 999.999, 1000.0, 1000.001, 1500.0, 5000.0)


def head_on_junction_cases():
    r = 1000.0
    net = _cross_net(r)
    speeds = (0.0, 1e-9, 10.0, 30.0, 61.0)
    for arm_b, da, db, va, vb, ta, tb in itertools.product(
            ("a", "b"), JUNCTION_DISTANCES, JUNCTION_DISTANCES, speeds, speeds, (True, False), (True, False)):
        trains = []
        for tid, arm, d, v, toward in (("A", "a", da, va, ta), ("B", arm_b, db, vb, tb)):
            # tracks run from the station (offset 0) to X (offset TRACK_LEN)
            hi = TRACK_LEN - d
            trains.append(_body(tid, arm, hi - 1.0, hi, UP if toward else DOWN, v))
        a, b = trains
        got = bool(detect_head_on_junction("X", trains, net))

        def dist(d, toward):
            if d == 0.0:
                return 0.0   # body at the junction
            return d if toward else (TRACK_LEN - d - 1.0) + TRACK_LEN

        inside = [dist(da, ta) <= r, dist(db, tb) <= r]
        want = (arm_b != "a" and va > 0 and vb > 0 and all(inside) and 1 < sum(inside) <= 2)
        yield (arm_b, da, db, va, vb, ta, tb), got, want


GRIDS = {
    "HeadOnTrack": head_on_track_cases,
    "RearEndTrack": rear_end_track_cases,
    "RearEndPlatform": rear_end_platform_cases,
    "HeadOnJunction": head_on_junction_cases,
}


def evaluate(name):
    """Return (combinations, mismatches) for one predicate grid."""
    n = 0
    bad = []
    for params, got, want in GRIDS[name]():
        n += 1
        if got != want:
            bad.append(params)
    return n, bad
