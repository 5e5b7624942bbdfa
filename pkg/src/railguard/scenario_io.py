"""Reading and writing TOML scenario files.

Quantities may be bare numbers in SI units (metres, metres per second,
seconds) or strings carrying a unit, e.g. ``"220 km/h"``, ``"4.5 km"`` or
``"1 s"``.  Layout::

    [network]
    stations = [{id = "S1", platforms = [[1, "E1"]], comm_range = "3 km"}]
    junctions = [{id = "J1"}]
    tracks = [{id = "E1", u = "S1", v = "J1", length = "4 km"}]

    [[trains]]
    id = "T1"
    track = "E1"
    position = "1200 m"
    speed = "90 km/h"
    direction = "down"

    [constants]
    headway = "200 m"

    [run]
    horizon = 600
"""
from __future__ import annotations

import math
import re
import sys
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .engine import Mode, Scenario
from .errors import ParseError, ValidationError
from .kinematics import KinematicConstants
from .network import (
    DEFAULT_COMM_RANGE,
    DEFAULT_TRAIN_LENGTH,
    DOWN,
    UP,
    Junction,
    PriorityClass,
    RailNetwork,
    Station,
    Track,
    TrainState,
    build_network,
)

_UNITS = {
    "length": {"m": 1.0, "km": 1000.0},
    "speed": {"m/s": 1.0, "km/h": 1000.0 / 3600.0, "kmh": 1000.0 / 3600.0, "kmph": 1000.0 / 3600.0},
    "time": {"s": 1.0, "min": 60.0, "h": 3600.0},
}
_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([a-zA-Z/]*)\s*$")


class _Ctx:
    """Field path plus a best-effort source line for diagnostics."""

    def __init__(self, text: str):
        self.lines = text.splitlines()

    def line_of(self, section: str, index: int | None, key: str | None) -> int | None:
        header = re.compile(r"^\s*\[\[?\s*" + re.escape(section) + r"\s*\]\]?\s*$")
        count = -1
        start = None
        for n, line in enumerate(self.lines, 1):
            if header.match(line):
                count += 1
                if index is None or count == index:
                    start = n
                    break
        if start is None:
            return None
        if key is None:
            return start
        keyre = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
        for n in range(start, len(self.lines)):
            line = self.lines[n]
            if n > start - 1 and line.lstrip().startswith("["):
                break
            if keyre.match(line):
                return n + 1
        return start

    def line_of_item(self, item_id: str) -> int | None:
        """Line of an inline table carrying ``id = "<item_id>"``."""
        pat = re.compile(r"\bid\s*=\s*[\"']" + re.escape(item_id) + r"[\"']")
        for n, line in enumerate(self.lines, 1):
            if pat.search(line):
                return n
        return None

    def fail(self, message, section, index=None, key=None, label=None, item=None):
        name = label or (f"{section}[{index}].{key}" if index is not None else f"{section}.{key}")
        line = self.line_of_item(item) if item else None
        raise ParseError(message, line=line or self.line_of(section, index, key), field=name)


def parse_quantity(value: Any, kind: str) -> float:
    """Convert a bare SI number or a ``"<number> <unit>"`` string to SI."""
    if isinstance(value, bool):
        raise ValueError(f"expected a {kind}, got a boolean")
    if isinstance(value, (int, float)):
        out = float(value)
    elif isinstance(value, str):
        m = _QTY.match(value)
        if not m:
            raise ValueError(f"cannot read {value!r} as a {kind}")
        unit = m.group(2).lower()
        table = _UNITS[kind]
        if unit and unit not in table:
            raise ValueError(f"unknown {kind} unit {m.group(2)!r} (use one of {', '.join(table)})")
        out = float(m.group(1)) * (table[unit] if unit else 1.0)
    else:
        raise ValueError(f"expected a {kind}, got {type(value).__name__}")
    if not math.isfinite(out):
        raise ValueError(f"{kind} must be finite")
    return out


def _direction(value) -> int:
    if isinstance(value, str):
        key = value.strip().lower()
        if key in ("up", "1"):
            return UP
        if key in ("down", "0"):
            return DOWN
    elif value in (0, 1) and not isinstance(value, bool):
        return int(value)
    raise ValueError(f"direction must be 'up' or 'down', got {value!r}")


def _get(ctx, table, key, kind, section, index=None, default=None, required=False, label=None):
    """Read ``table[key]`` as ``kind``; ``label`` names nested fields in diagnostics."""
    item = table.get("id") if label and isinstance(table.get("id"), str) else None
    if key not in table:
        if required:
            ctx.fail("missing required field", section, index, None,
                     label=label or _label(section, index, key), item=item)
        return default
    try:
        if kind in _UNITS:
            return parse_quantity(table[key], kind)
        if kind == "int":
            v = table[key]
            if isinstance(v, bool) or not isinstance(v, int):
                raise ValueError(f"expected an integer, got {v!r}")
            return v
        if kind == "str":
            v = table[key]
            if not isinstance(v, str) or not v:
                raise ValueError(f"expected a non-empty string, got {v!r}")
            return v
        if kind == "float":
            return parse_quantity(table[key], "length") if isinstance(table[key], str) else float(table[key])
        return table[key]
    except (TypeError, ValueError) as exc:
        ctx.fail(str(exc), section, index, key, label=label, item=item)


def _label(section, index, key):
    return f"{section}[{index}].{key}" if index is not None else f"{section}.{key}"


def _network(ctx: _Ctx, data: dict) -> RailNetwork:
    net = data.get("network")
    if not isinstance(net, dict):
        raise ParseError("missing [network] section", field="network")
    vertices = []
    for i, st in enumerate(net.get("stations", [])):
        sid = _get(ctx, st, "id", "str", "network", None, required=True, label=f"network.stations[{i}].id")
        platforms = []
        raw = st.get("platforms", [])
        items = raw.items() if isinstance(raw, dict) else raw
        try:
            for p, tid in items:
                platforms.append((int(p), str(tid)))
        except (TypeError, ValueError):
            ctx.fail("platforms must be [number, track] pairs", "network", None, "stations",
                     label=f"network.stations[{i}].platforms", item=sid)
        rng = _get(ctx, st, "comm_range", "length", "network", None, default=3000.0,
                   label=f"network.stations[{i}].comm_range")
        vertices.append(Station(sid, platforms=tuple(platforms), comm_range=rng))
    for i, jn in enumerate(net.get("junctions", [])):
        jid = _get(ctx, jn, "id", "str", "network", None, required=True, label=f"network.junctions[{i}].id")
        rng = _get(ctx, jn, "comm_range", "length", "network", None, default=1000.0,
                   label=f"network.junctions[{i}].comm_range")
        vertices.append(Junction(jid, comm_range=rng))
    tracks = []
    for i, tr in enumerate(net.get("tracks", [])):
        where = f"network.tracks[{i}]"
        tid = _get(ctx, tr, "id", "str", "network", None, required=True, label=f"{where}.id")
        u = _get(ctx, tr, "u", "str", "network", None, required=True, label=f"{where}.u")
        v = _get(ctx, tr, "v", "str", "network", None, required=True, label=f"{where}.v")
        length = _get(ctx, tr, "length", "length", "network", None, required=True, label=f"{where}.length")
        tracks.append(Track(tid, u, v, length))
    return build_network(vertices, tracks)


def _trains(ctx: _Ctx, data: dict, default_range: float) -> list[TrainState]:
    out = []
    for i, tr in enumerate(data.get("trains", [])):
        sec = "trains"
        tid = _get(ctx, tr, "id", "str", sec, i, required=True)
        track = _get(ctx, tr, "track", "str", sec, i, required=True)
        position = _get(ctx, tr, "position", "length", sec, i, required=True)
        speed = _get(ctx, tr, "speed", "speed", sec, i, default=0.0)
        direction = _get(ctx, tr, "direction", "raw", sec, i, default="up")
        try:
            direction = _direction(direction)
        except ValueError as exc:
            ctx.fail(str(exc), sec, i, "direction")
        category = _get(ctx, tr, "category", "raw", sec, i, default="passenger")
        try:
            category = PriorityClass.parse(category)
        except ValueError as exc:
            ctx.fail(str(exc), sec, i, "category")
        platform = tr.get("platform")
        if platform is not None:
            try:
                sid, p = platform
                platform = (str(sid), int(p))
            except (TypeError, ValueError):
                ctx.fail("platform must be [station, number]", sec, i, "platform")
        route = tr.get("route", [])
        if not isinstance(route, list) or not all(isinstance(r, str) for r in route):
            ctx.fail("route must be a list of track ids", sec, i, "route")
        beta = tr.get("beta")
        if beta is not None:
            try:
                stop, move = beta
                beta = (float(stop), float(move))
            except (TypeError, ValueError):
                ctx.fail("beta must be [stop, move]", sec, i, "beta")
        out.append(TrainState(
            id=tid, track=track, position=position, speed=speed, direction=direction,
            length=_get(ctx, tr, "length", "length", sec, i, default=DEFAULT_TRAIN_LENGTH),
            comm_range=_get(ctx, tr, "comm_range", "length", sec, i, default=default_range),
            category=category, index=i, platform=platform, route=tuple(route),
            activation_tick=_get(ctx, tr, "activation_tick", "int", sec, i, default=0),
            beta=beta,
        ))
    return out


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    ctx = _Ctx(text)
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ParseError(str(exc), line=int(m.group(1)) if m else None) from None
    const = data.get("constants", {})
    run = data.get("run", {})
    mu_k = _get(ctx, const, "mu_k", "float", "constants", default=0.42)
    g = _get(ctx, const, "g", "float", "constants", default=9.81)
    try:
        constants = KinematicConstants(mu_k, g)
    except ValidationError as exc:
        raise ValidationError(f"constants: {exc}") from None
    headway = _get(ctx, const, "headway", "length", "constants", default=200.0)
    critical = _get(ctx, const, "critical", "length", "constants", default=100.0)
    default_range = _get(ctx, const, "comm_range", "length", "constants", default=DEFAULT_COMM_RANGE)
    tick = _get(ctx, run, "tick", "time", "run", default=1.0)
    horizon = _get(ctx, run, "horizon", "int", "run", default=86_400)
    mode = _get(ctx, run, "mode", "str", "run", default="distributed")
    try:
        mode = Mode(mode.lower())
    except ValueError:
        ctx.fail("mode must be 'distributed' or 'centralized'", "run", None, "mode")
    seed = _get(ctx, run, "seed", "int", "run", default=0)
    latency = _get(ctx, run, "latency", "int", "run", default=0)
    network = _network(ctx, data)
    trains = _trains(ctx, data, default_range)
    return Scenario(network, tuple(trains), constants, headway, critical, default_range,
                    tick, horizon, mode, seed, latency, name=name)


def load_scenario(path) -> Scenario:
    """Load a scenario file into a validated :class:`Scenario`."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_scenario(text, name=path.stem)


def scenario_to_dict(scenario: Scenario) -> dict:
    net = scenario.network
    stations = []
    for s in net.stations.values():
        stations.append({"id": s.id, "platforms": [[p, t] for p, t in s.platforms],
                         "comm_range": s.comm_range})
    junctions = [{"id": j.id, "comm_range": j.comm_range} for j in net.junctions.values()]
    tracks = [{"id": t.id, "u": t.u, "v": t.v, "length": t.length} for t in net.tracks.values()]
    trains = []
    for t in scenario.trains:
        row = {"id": t.id, "track": t.track, "position": t.position, "speed": t.speed,
               "direction": "up" if t.direction == UP else "down", "length": t.length,
               "comm_range": t.comm_range, "category": t.category.name.lower()}
        if t.platform is not None:
            row["platform"] = [t.platform[0], t.platform[1]]
        if t.route:
            row["route"] = list(t.route)
        if t.activation_tick:
            row["activation_tick"] = t.activation_tick
        if t.beta is not None:
            row["beta"] = list(t.beta)
        trains.append(row)
    return {
        "network": {"stations": stations, "junctions": junctions, "tracks": tracks},
        "trains": trains,
        "constants": {"mu_k": scenario.constants.mu_k, "g": scenario.constants.g,
                      "headway": scenario.headway, "critical": scenario.critical,
                      "comm_range": scenario.default_range},
        "run": {"tick": scenario.tick, "horizon": scenario.horizon, "mode": scenario.mode.value,
                "seed": scenario.seed, "latency": scenario.latency},
    }


def dump_scenario(scenario: Scenario, path=None) -> str:
    """Serialise ``scenario`` as TOML (SI units); also write it when ``path`` is given."""
    text = tomli_w.dumps(scenario_to_dict(scenario))
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
