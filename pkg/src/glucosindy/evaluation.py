"""Rolling-origin forecast evaluation against a persistence baseline."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .series import AlignedDataset, UniformSeries, make_series
from .simulate import SimConfig, simulate
from .stlsq import SparseModel


@dataclass(frozen=True)
class EvalConfig:
    horizon: int = 72
    origin_stride: int = 12
    split: float = 0.75

    def __post_init__(self):
        if self.horizon < 1 or self.origin_stride < 1:
            raise ValueError("horizon and origin_stride must be >= 1")
        if not 0 < self.split < 1:
            raise ValueError("split must lie strictly between 0 and 1")


def _values(x) -> np.ndarray:
    return np.asarray(x.values if isinstance(x, UniformSeries) else x, dtype=float)


def _check(pred, truth):
    if isinstance(pred, UniformSeries) and isinstance(truth, UniformSeries):
        if pred.dt != truth.dt or pred.t0 != truth.t0:
            raise ValueError("series are on different grids")
    p, t = _values(pred), _values(truth)
    if p.shape != t.shape or p.size == 0:
        raise ValueError(f"length mismatch: {p.size} vs {t.size}")
    return p, t


def rmse(pred, truth) -> float:
    p, t = _check(pred, truth)
    return math.sqrt(math.fsum((p - t) ** 2) / p.size)


def mae(pred, truth) -> float:
    p, t = _check(pred, truth)
    return math.fsum(np.abs(p - t)) / p.size


def persistence_baseline(value_at_origin: float, horizon: int, t0: float = 0.0, dt: float = 300.0) -> UniformSeries:
    """Repeat the last observed value over the horizon (samples 1..horizon)."""
    if not math.isfinite(value_at_origin):
        raise ValueError("origin value must be finite")
    return make_series(t0 + dt, dt, np.full(horizon, float(value_at_origin)), "mg/dL")


@dataclass
class OriginResult:
    origin: int
    t_origin: float
    n_steps: int
    status: str
    included: bool
    rmse: float
    mae: float
    baseline_rmse: float
    baseline_mae: float


def _nan_to_none(obj):
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_nan_to_none(v) for v in obj]
    return obj


@dataclass
class EvalReport:
    origins: list[OriginResult] = field(default_factory=list)
    rmse: float = math.nan
    mae: float = math.nan
    baseline_rmse: float = math.nan
    baseline_mae: float = math.nan
    n_origins: int = 0
    n_diverged: int = 0
    n_excluded: int = 0

    def to_json(self) -> str:
        # undefined metrics (excluded origins) become null, keeping the JSON strict
        return json.dumps(_nan_to_none(asdict(self)), indent=2, allow_nan=False) + "\n"

    def origins_csv(self) -> str:
        buf = io.StringIO()
        names = list(OriginResult.__dataclass_fields__)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for o in self.origins:
            w.writerow([getattr(o, n) for n in names])
        return buf.getvalue()


def aggregate(origins: list[OriginResult]) -> dict:
    """Pooled metrics over included origins, exact regardless of order."""
    used = [o for o in origins if o.included]
    n = sum(o.n_steps for o in used)
    if n == 0:
        return dict(rmse=math.nan, mae=math.nan, baseline_rmse=math.nan, baseline_mae=math.nan)
    pool_sq = lambda attr: math.sqrt(math.fsum(o.n_steps * getattr(o, attr) ** 2 for o in used) / n)  # noqa: E731
    pool_abs = lambda attr: math.fsum(o.n_steps * getattr(o, attr) for o in used) / n  # noqa: E731
    return dict(
        rmse=pool_sq("rmse"), mae=pool_abs("mae"),
        baseline_rmse=pool_sq("baseline_rmse"), baseline_mae=pool_abs("baseline_mae"),
    )


def origin_indices(dataset: AlignedDataset, config: EvalConfig) -> list[int]:
    """Origins in the held-out tail of each segment with a full horizon ahead."""
    out = []
    for a, b in dataset.segments:
        start = a + int(np.floor(config.split * (b - a)))
        out.extend(range(start, b - config.horizon, config.origin_stride))
    return out


def evaluate_origin(
    model: SparseModel, dataset: AlignedDataset, origin: int, config: EvalConfig, sim: SimConfig
) -> OriginResult:
    g = dataset.channel(model.state_names[0]).values
    end = origin + config.horizon + 1
    controls = {c: dataset.channel(c).values[origin:end] for c in model.control_names}
    fc = simulate(model, [g[origin]], controls, config.horizon, sim, dt=dataset.grid.dt)
    steps = fc.completed_steps
    # diverged forecasts count only if at least half the horizon completed
    included = steps >= config.horizon / 2 and steps >= 1
    truth = g[origin + 1 : origin + 1 + steps]
    pred = fc.states[model.state_names[0]].values[1 : 1 + steps]
    base = np.full(steps, g[origin])
    if included:
        r, m = rmse(pred, truth), mae(pred, truth)
        br, bm = rmse(base, truth), mae(base, truth)
    else:
        r = m = br = bm = math.nan
    return OriginResult(origin, dataset.grid.time(origin), steps, fc.status, included, r, m, br, bm)


def rolling_evaluate(
    model: SparseModel,
    dataset: AlignedDataset,
    config: EvalConfig = EvalConfig(),
    sim: SimConfig = SimConfig(),
) -> EvalReport:
    """Forecast ``config.horizon`` steps from every held-out origin.

    Each forecast starts from the observed glucose at its origin and uses the
    recorded controls. The baseline is scored on exactly the same steps.
    """
    origins = origin_indices(dataset, config)
    if not origins:
        raise ValueError("no valid forecast origins: segments too short for the horizon")
    results = [evaluate_origin(model, dataset, o, config, sim) for o in origins]
    return EvalReport(
        origins=results,
        n_origins=len(results),
        n_diverged=sum(r.status != "completed" for r in results),
        n_excluded=sum(not r.included for r in results),
        **aggregate(results),
    )
