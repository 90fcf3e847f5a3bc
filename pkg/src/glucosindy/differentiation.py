"""Numerical time derivatives of gridded channels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import savgol_filter

from .series import AlignedDataset, UniformSeries, slice_series

SCHEMES = ("forward", "central", "smoothed")


@dataclass(frozen=True)
class DerivativeSpec:
    scheme: str = "smoothed"
    window: int = 7
    polyorder: int = 3

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.scheme == "smoothed":
            if self.window < 5 or self.window % 2 == 0:
                raise ValueError("window must be an odd integer >= 5")
            if not 2 <= self.polyorder <= self.window - 1:
                raise ValueError("polyorder must lie in [2, window - 1]")

    @property
    def min_length(self) -> int:
        return {"forward": 2, "central": 3, "smoothed": self.window}[self.scheme]


def differentiate_values(x: np.ndarray, dt: float, spec: DerivativeSpec) -> np.ndarray:
    """Derivative of ``x`` sampled every ``dt`` (in the caller's time unit)."""
    x = np.asarray(x, dtype=float)
    if x.size < spec.min_length:
        raise ValueError(
            f"{spec.scheme} scheme needs at least {spec.min_length} samples, got {x.size}"
        )
    if spec.scheme == "forward":
        d = np.empty_like(x)
        d[:-1] = (x[1:] - x[:-1]) / dt
        d[-1] = d[-2]
        return d
    if spec.scheme == "central":
        # 2-point one-sided stencils at both ends
        return np.gradient(x, dt, edge_order=1)
    # edges use the polynomial fitted to the first/last full window
    return savgol_filter(x, spec.window, spec.polyorder, deriv=1, delta=dt, mode="interp")


def differentiate(series: UniformSeries, spec: DerivativeSpec, time_unit: float = 60.0) -> UniformSeries:
    """Derivative on the same grid, in input units per ``time_unit`` seconds.

    The default ``time_unit`` of 60 gives per-minute rates.
    """
    d = differentiate_values(series.values, series.dt / time_unit, spec)
    units = f"{series.units}/min" if time_unit == 60.0 and series.units else series.units
    return UniformSeries(series.t0, series.dt, d, units)


def differentiate_segments(
    dataset: AlignedDataset, name: str, spec: DerivativeSpec, time_unit: float = 60.0
) -> dict[tuple[int, int], UniformSeries]:
    """Differentiate one channel segment by segment; stencils never cross a gap."""
    s = dataset.channel(name)
    return {
        (a, b): differentiate(slice_series(s, a, b), spec, time_unit) for a, b in dataset.segments
    }
