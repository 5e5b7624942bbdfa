from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from railguard.engine import Mode
from railguard.errors import ParseError, ValidationError
from railguard.generate import MIXED, TWO_WAY_BANDED, default_base, sweep_scenario
from railguard.network import DOWN, UP, PriorityClass
from railguard.scenario_io import dump_scenario, load_scenario, parse_quantity, parse_scenario

DATA = Path(__file__).resolve().parents[1] / "src" / "railguard" / "data"

MINIMAL = """\
[network]
stations = [{ id = "A" }, { id = "B" }]
tracks = [{ id = "t", u = "A", v = "B", length = "12 km" }]

[[trains]]
id = "T1"
track = "t"
position = 500
speed = "220 km/h"
direction = "down"
category = "premium"

[constants]
headway = 200
critical = 100

[run]
horizon = 30
"""


def same(a, b):
    assert a.network.track_ids == b.network.track_ids
    for tid in a.network.track_ids:
        assert a.network.tracks[tid] == b.network.tracks[tid]
    assert a.network.stations == b.network.stations
    assert a.network.junctions == b.network.junctions
    assert a.trains == b.trains
    for field in ("constants", "headway", "critical", "default_range", "tick", "horizon",
                  "mode", "seed", "latency"):
        assert getattr(a, field) == getattr(b, field), field


# -- examples --------------------------------------------------------------------

def test_minimal_file():
    sc = parse_scenario(MINIMAL)
    t = sc.trains[0]
    assert sc.network.tracks["t"].length == 12000.0
    assert t.speed == pytest.approx(61.1111, abs=1e-4)
    assert t.direction == DOWN
    assert t.category is PriorityClass.PREMIUM
    assert sc.horizon == 30
    assert sc.mode is Mode.DISTRIBUTED


def test_four_train_file_shape():
    sc = load_scenario(DATA / "four_trains.toml")
    assert len(sc.network.stations) == 12
    assert len(sc.trains) == 4
    assert sc.headway == 200.0


def test_sweep_base_file_loads():
    sc = load_scenario(DATA / "sweep_base.toml")
    assert len(sc.network.stations) == 12
    assert sc.trains == ()


def test_headway_not_above_critical():
    with pytest.raises(ValidationError):
        parse_scenario(MINIMAL.replace("headway = 200", "headway = 100"))


@pytest.mark.parametrize("value,kind,expected", [
    ("220 km/h", "speed", 220 / 3.6),
    ("36 km/h", "speed", 10.0),
    ("15 m/s", "speed", 15.0),
    (12, "speed", 12.0),
    ("2 km", "length", 2000.0),
    ("350 m", "length", 350.0),
    ("1.5", "length", 1.5),
])
def test_quantities(value, kind, expected):
    assert parse_quantity(value, kind) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("value", ["fast", "3 parsecs", True, [1], "inf m"])
def test_bad_quantities(value):
    with pytest.raises(ValueError):
        parse_quantity(value, "length")


# -- diagnostics -----------------------------------------------------------------

def test_toml_syntax_error_has_line():
    with pytest.raises(ParseError) as info:
        parse_scenario(MINIMAL.replace('track = "t"', 'track = "t'))
    assert info.value.line == 7


def test_bad_train_field_reports_line_and_field():
    with pytest.raises(ParseError) as info:
        parse_scenario(MINIMAL.replace("position = 500", 'position = "5 furlongs"'))
    assert info.value.line == 8
    assert info.value.field == "trains[0].position"
    assert "furlongs" in str(info.value)


def test_bad_track_length_reports_track_line():
    with pytest.raises(ParseError) as info:
        parse_scenario(MINIMAL.replace('"12 km"', '"twelve"'))
    assert info.value.line == 3
    assert info.value.field == "network.tracks[0].length"


def test_missing_network():
    with pytest.raises(ParseError):
        parse_scenario("[run]\nhorizon = 3\n")


def test_missing_required_train_field():
    with pytest.raises(ParseError) as info:
        parse_scenario(MINIMAL.replace('track = "t"\n', ""))
    assert info.value.field == "trains[0].track"


def test_bad_direction_and_mode():
    with pytest.raises(ParseError):
        parse_scenario(MINIMAL.replace('"down"', '"sideways"'))
    with pytest.raises(ParseError):
        parse_scenario(MINIMAL + 'mode = "telepathic"\n')


def test_unreadable_file(tmp_path):
    with pytest.raises(ParseError):
        load_scenario(tmp_path / "absent.toml")


def test_unknown_track_is_a_validation_error():
    with pytest.raises(ValidationError):
        parse_scenario(MINIMAL.replace('track = "t"', 'track = "nowhere"'))


# -- round trip --------------------------------------------------------------------

@pytest.mark.parametrize("name", ["four_trains.toml", "sweep_base.toml"])
def test_shipped_files_round_trip(name):
    sc = load_scenario(DATA / name)
    same(sc, parse_scenario(dump_scenario(sc)))


def test_dump_to_path(tmp_path):
    sc = parse_scenario(MINIMAL)
    out = tmp_path / "m.toml"
    text = dump_scenario(sc, out)
    assert out.read_text(encoding="utf-8") == text
    same(sc, load_scenario(out))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 30), st.sampled_from([MIXED, TWO_WAY_BANDED]),
       st.sampled_from(["distributed", "centralized"]))
def test_generated_scenarios_round_trip(seed, m, profile, mode):
    sc = sweep_scenario(default_base(77), m, seed, mode=mode, profile=profile)
    back = parse_scenario(dump_scenario(sc))
    same(sc, back)
    assert {t.direction for t in back.trains} <= {UP, DOWN}
