import pytest

from railguard.network import DOWN, UP, Junction, Station, Track, TrainState, build_network


def chain(lengths, first="SA", last="SB"):
    """Path network ``first - J1 - J2 - ... - last`` with one track per length.

    Tracks are named t1, t2, ... and run from left to right (UP).
    """
    n = len(lengths)
    names = [first] + [f"J{i}" for i in range(1, n)] + [last]
    tracks = [Track(f"t{i + 1}", names[i], names[i + 1], float(L)) for i, L in enumerate(lengths)]
    vertices = [Station(first), Station(last)] + [Junction(v) for v in names[1:-1]]
    return build_network(vertices, tracks)


def cross(arm=2000.0, junction_range=1000.0):
    """Four stations around one junction X, arms a..d of equal length, all pointing at X."""
    tracks = [Track(k, f"S{k}", "X", arm) for k in "abcd"]
    vertices = [Station(f"S{k}") for k in "abcd"] + [Junction("X", comm_range=junction_range)]
    return build_network(vertices, tracks)


def tr(tid, track, pos, speed=0.0, direction=UP, **kw):
    return TrainState(tid, track, float(pos), float(speed), direction, **kw)


# -- acceptance reporting ---------------------------------------------------------
# Tests marked ``criterion(n, title)`` get one PASS/FAIL line each in the
# terminal summary, reflecting the real test outcome.

_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    failed = rep.failed or (rep.when == "call" and rep.skipped)
    prev = _criteria.get(n, (title, "PASS", ""))
    if failed:
        note = "skipped" if rep.skipped else str(rep.longrepr).strip().splitlines()[-1]
        _criteria[n] = (title, "FAIL", note)
    elif rep.when == "call" and prev[1] != "FAIL":
        _criteria[n] = (title, "PASS", getattr(item, "criterion_note", ""))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, verdict, note = _criteria[n]
        line = f"criterion {n}: {verdict} - {title}"
        terminalreporter.write_line(line + (f" ({note})" if note else ""))


__all__ = ["chain", "cross", "tr", "UP", "DOWN"]
