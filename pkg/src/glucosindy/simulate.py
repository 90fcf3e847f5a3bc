"""Forward integration of identified models with recorded control inputs."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .series import UniformSeries
from .stlsq import SparseModel

INTERP_MODES = ("hold", "linear")


@dataclass(frozen=True)
class SimConfig:
    substeps: int = 5
    control_interp: str = "linear"
    interp_overrides: Mapping[str, str] = field(default_factory=lambda: {"basal": "hold"})
    clamp_min: float | None = None
    clamp_max: float | None = None

    def __post_init__(self):
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        modes = [self.control_interp, *self.interp_overrides.values()]
        if any(m not in INTERP_MODES for m in modes):
            raise ValueError(f"control interpolation must be one of {INTERP_MODES}")
        if self.clamp_min is not None and self.clamp_max is not None and not self.clamp_min < self.clamp_max:
            raise ValueError("clamp_min must be below clamp_max")

    def interp_for(self, channel: str) -> str:
        return self.interp_overrides.get(channel, self.control_interp)

    @property
    def divergence_bound(self) -> float:
        bounds = [abs(b) for b in (self.clamp_min, self.clamp_max) if b is not None]
        return 10.0 * max(bounds) if bounds else np.inf


@dataclass
class Forecast:
    """Per-state trajectories on the grid, origin included at index 0.

    ``diverged_at`` is the first index whose value is non-finite or past the
    divergence bound; values from there on are NaN.
    """

    states: dict[str, UniformSeries]
    diverged_at: int | None = None

    @property
    def status(self) -> str:
        return "completed" if self.diverged_at is None else f"diverged-at-index {self.diverged_at}"

    @property
    def completed_steps(self) -> int:
        n = len(next(iter(self.states.values())))
        return n - 1 if self.diverged_at is None else self.diverged_at - 1


class ModelRHS:
    """Compiled right-hand side ``xi.T @ phi(state, controls)`` for one model."""

    def __init__(self, model: SparseModel):
        self.model = model
        # only terms with a nonzero coefficient are ever evaluated
        self.rows = [i for i in range(len(model.terms)) if np.any(model.xi[i])]
        self.xi = model.xi[self.rows]

    def __call__(self, state, controls) -> np.ndarray:
        # numpy scalars overflow to inf (caught as divergence) where floats raise
        values = dict(zip(self.model.state_names, np.asarray(state, dtype=float)))
        values.update(zip(self.model.control_names, np.asarray(controls, dtype=float)))
        phi = np.array([float(self.model.terms[i].evaluate(values)) for i in self.rows])
        return phi @ self.xi if self.rows else np.zeros(len(self.model.state_names))


def rhs_eval(model: SparseModel, state, controls) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    controls = np.asarray(controls, dtype=float)
    if state.shape != (len(model.state_names),) or controls.shape != (len(model.control_names),):
        raise ValueError(
            f"expected {len(model.state_names)} states and {len(model.control_names)} controls"
        )
    return ModelRHS(model)(state, controls)


def rk4_step(f: Callable[[float, np.ndarray], np.ndarray], t: float, x: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, x)
    k2 = f(t + h / 2, x + h / 2 * k1)
    k3 = f(t + h / 2, x + h / 2 * k2)
    k4 = f(t + h, x + h * k3)
    return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _control_matrix(model: SparseModel, controls, horizon: int) -> np.ndarray:
    cols = []
    for name in model.control_names:
        if name not in controls:
            raise KeyError(f"control channel {name!r} missing")
        c = controls[name]
        v = np.asarray(c.values if isinstance(c, UniformSeries) else c, dtype=float)
        if v.size < horizon + 1:
            raise ValueError(
                f"control {name!r} covers {v.size - 1} steps, horizon needs {horizon}"
            )
        cols.append(v[: horizon + 1])
    return np.column_stack(cols) if cols else np.zeros((horizon + 1, 0))


def simulate(
    model: SparseModel,
    x0,
    controls: Mapping[str, UniformSeries | np.ndarray],
    horizon: int,
    config: SimConfig = SimConfig(),
    dt: float = 300.0,
    t0: float = 0.0,
    time_unit: float = 60.0,
) -> Forecast:
    """Classical RK4 with ``config.substeps`` steps per grid interval.

    ``controls`` start at the origin and need ``horizon + 1`` samples. The
    model's derivative is per ``time_unit`` seconds, ``dt`` is the grid step
    in seconds.
    """
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (len(model.state_names),):
        raise ValueError("x0 length must match the model states")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    U = _control_matrix(model, controls, horizon)
    linear = np.array([config.interp_for(c) == "linear" for c in model.control_names], dtype=bool)
    rhs = ModelRHS(model)
    h = dt / time_unit / config.substeps
    bound = config.divergence_bound
    lo = -np.inf if config.clamp_min is None else config.clamp_min
    hi = np.inf if config.clamp_max is None else config.clamp_max

    interval = dt / time_unit
    out = np.full((horizon + 1, x.size), np.nan)
    out[0] = x
    diverged = None
    for i in range(horizon):
        u0, u1 = U[i], U[i + 1]

        def f(t, state, u0=u0, u1=u1):
            # t runs over [0, interval] within the current grid step
            u = np.where(linear, u0 + (t / interval) * (u1 - u0), u0)
            return rhs(state, u)

        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(config.substeps):
                x = rk4_step(f, k * h, x, h)
                if not np.all(np.isfinite(x)) or np.any(np.abs(x) > bound):
                    diverged = i + 1
                    break
                x = np.clip(x, lo, hi)
        if diverged is not None:
            break
        out[i + 1] = x

    names = model.state_names
    states = {n: UniformSeries(t0, dt, out[:, j]) for j, n in enumerate(names)}
    return Forecast(states, diverged)


def forecast_to_csv(forecast: Forecast, observed: Mapping[str, np.ndarray] | None = None) -> str:
    """CSV text with ``t_iso`` and one column per state, status as a ``#`` line."""
    from .ingest import format_timestamp

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = list(forecast.states)
    observed = observed or {}
    w.writerow(["t_iso", *names, *(f"{n}_observed" for n in observed)])
    first = forecast.states[names[0]]
    for i in range(len(first)):
        row = [format_timestamp(first.time(i))]
        row += [_fmt(forecast.states[n].values[i]) for n in names]
        row += [_fmt(observed[n][i]) for n in observed]
        w.writerow(row)
    buf.write(f"# status: {forecast.status}\n")
    return buf.getvalue()


def _fmt(v: float) -> str:
    return "" if not np.isfinite(v) else repr(float(v))
