"""Immutable world snapshot that every layer of the simulator reads."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import _core
from .kinematics import DEFAULT_CONSTANTS, KinematicConstants, braking_distance
from .network import UP, RailNetwork, TrainState, body_interval


@dataclass(frozen=True)
class World:
    network: RailNetwork
    trains: tuple[TrainState, ...]
    tick: int = 0
    headway: float = 200.0
    critical: float = 100.0
    constants: KinematicConstants = DEFAULT_CONSTANTS
    dt: float = 1.0
    _by_id: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {t.id: t for t in self.trains})

    def train(self, train_id: str) -> TrainState:
        return self._by_id[train_id]

    def has_train(self, train_id: str) -> bool:
        return train_id in self._by_id

    @property
    def by_id(self) -> dict[str, TrainState]:
        return self._by_id

    def braking(self, train_id: str) -> float:
        return braking_distance(self._by_id[train_id].speed, self.constants)

    def with_trains(self, trains, **changes) -> "World":
        return replace(self, trains=tuple(trains), **changes)

    @cached_property
    def layout(self) -> tuple[np.ndarray, ...]:
        """Per-train arrays: track index, body [lo, hi], tip position, direction, speed."""
        net = self.network
        m = len(self.trains)
        track = np.empty(m, dtype=np.int64)
        lo = np.empty(m)
        hi = np.empty(m)
        pos = np.empty(m)
        up = np.empty(m, dtype=bool)
        speed = np.empty(m)
        for i, t in enumerate(self.trains):
            track[i] = net.track_index[t.track]
            lo[i], hi[i] = body_interval(t, net)
            pos[i] = t.position
            up[i] = t.direction == UP
            speed[i] = t.speed
        return track, lo, hi, pos, up, speed

    @cached_property
    def gaps(self) -> np.ndarray:
        net = self.network
        track, lo, hi = self.layout[:3]
        return _core.pair_gaps(track, lo, hi, net.track_u, net.track_v, net.track_len, net.dist)

    def geometry(self) -> np.ndarray:
        """Pairwise body gaps (trains x trains) from the kernel backend."""
        return self.gaps
