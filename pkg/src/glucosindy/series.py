"""Uniform-grid time series shared by every stage of the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class UniformSeries:
    """One channel sampled on a fixed-step grid.

    Sample ``i`` sits at ``t0 + i * dt`` seconds (UTC epoch). Per-sample
    timestamps are never stored.
    """

    t0: float
    dt: float
    values: np.ndarray
    units: str = ""

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("values must be a non-empty 1-D sequence")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def time(self, i: int) -> float:
        return self.t0 + i * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) * self.dt

    def __eq__(self, other):
        if not isinstance(other, UniformSeries):
            return NotImplemented
        return (
            self.t0 == other.t0
            and self.dt == other.dt
            and self.units == other.units
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    __hash__ = None


def make_series(t0: float, dt: float, values: Sequence[float], units: str = "") -> UniformSeries:
    return UniformSeries(float(t0), float(dt), np.asarray(values, dtype=float), units)


def slice_series(series: UniformSeries, start: int, stop: int) -> UniformSeries:
    """Half-open slice ``[start, stop)`` with the time origin shifted to match."""
    n = len(series)
    if not (0 <= start < stop <= n):
        raise IndexError(f"range [{start}, {stop}) invalid for series of length {n}")
    return UniformSeries(
        series.t0 + start * series.dt, series.dt, series.values[start:stop].copy(), series.units
    )


@dataclass(frozen=True)
class Grid:
    t0: float
    dt: float
    n: int

    def time(self, i: int) -> float:
        return self.t0 + i * self.dt

    def index_of(self, t: float) -> int:
        """Nearest grid index for timestamp ``t`` (halves round up)."""
        return int(np.floor((t - self.t0) / self.dt + 0.5))


@dataclass(frozen=True)
class AlignedDataset:
    """State and control channels sharing one grid, with gap-free segments.

    ``segments`` holds half-open index ranges; samples outside every segment
    (inside long CGM outages) may carry NaN state values.
    """

    grid: Grid
    state_channels: Mapping[str, UniformSeries]
    control_channels: Mapping[str, UniformSeries]
    segments: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self):
        for name, s in {**self.state_channels, **self.control_channels}.items():
            if len(s) != self.grid.n or s.dt != self.grid.dt or s.t0 != self.grid.t0:
                raise ValueError(f"channel {name!r} is not on the dataset grid")
        overlap = set(self.state_channels) & set(self.control_channels)
        if overlap:
            raise ValueError(f"channel names used twice: {sorted(overlap)}")
        prev_end = 0
        for a, b in self.segments:
            if b - a < 2 or a < prev_end or b > self.grid.n:
                raise ValueError(f"invalid segment list {self.segments}")
            prev_end = b
        object.__setattr__(self, "segments", tuple((int(a), int(b)) for a, b in self.segments))

    @property
    def channels(self) -> dict[str, UniformSeries]:
        return {**self.state_channels, **self.control_channels}

    def channel(self, name: str) -> UniformSeries:
        try:
            return self.channels[name]
        except KeyError:
            raise KeyError(f"unknown channel {name!r}") from None

    def with_controls(self, **extra: UniformSeries) -> "AlignedDataset":
        return AlignedDataset(
            self.grid, dict(self.state_channels), {**self.control_channels, **extra}, self.segments
        )
