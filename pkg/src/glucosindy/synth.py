"""Synthetic patients with known sparse glucose dynamics.

Ground truth, in minutes::

    dG/dt = -p1 * (G - Gb) - p2 * I_act + p3 * C_act

where ``I_act`` and ``C_act`` are the bolus and carb activities produced by
the default action profiles. The generator integrates this with RK4 at a
0.1-minute step, samples the 5-minute grid and adds seeded Gaussian noise to
glucose only.

Noise stream (reproducible outside numpy): Philox4x64-10 keyed with
``(seed, 0)`` and counters 0, 1, 2, ... emits 64-bit words ``w``. Each word
maps to ``u = (w >> 11) * 2**-53``. Consecutive pairs ``(u1, u2)`` give
``r = sqrt(-2 ln(1 - u1))`` and the two normals ``r cos(2 pi u2)``,
``r sin(2 pi u2)``, used in that order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .fileio import atomic_write_text
from .ingest import EventRecord, align, write_events
from .insulin import CARB_PROFILE, INSULIN_PROFILE, ActionProfile, activity_at, events_to_activity
from .library import LibrarySpec, enumerate_terms, term_to_string
from .series import AlignedDataset
from .simulate import rk4_step
from .stlsq import SparseModel, StlsqConfig, model_to_dict

INTERNAL_STEP_MIN = 0.1
DEFAULT_START = 1577836800.0  # 2020-01-01T00:00:00Z

# Default 48 h block of (hour, grams) meals and (hour, units) boluses, repeated
# for longer runs. Amounts are large because the fixed truth parameters need
# them for clear excursions; meals and boluses are deliberately offset so the
# two activity channels stay distinguishable under CGM noise.
BLOCK_HOURS = 48.0
BLOCK_MEALS = (
    (6.5, 490.0), (12.0, 340.0), (16.0, 170.0), (20.5, 330.0),
    (23.0, 150.0), (30.0, 100.0), (35.5, 140.0),
)
BLOCK_BOLUSES = (
    (7.5, 22.0), (8.5, 18.0), (12.5, 18.0), (19.0, 20.0), (19.5, 10.0),
    (29.0, 17.0), (37.0, 7.0), (38.5, 23.0), (42.0, 12.0), (43.5, 8.0),
)


def default_schedule(duration_hours: float):
    """Meal and bolus lists ``[(hour, amount), ...]`` covering the duration."""
    meals, boluses = [], []
    offset = 0.0
    while offset < duration_hours:
        for block, out in ((BLOCK_MEALS, meals), (BLOCK_BOLUSES, boluses)):
            out.extend((offset + h, a) for h, a in block if offset + h < duration_hours)
        offset += BLOCK_HOURS
    return meals, boluses


@dataclass(frozen=True)
class SynthConfig:
    duration_hours: float = 48.0
    seed: int = 0
    noise_sd: float = 0.0
    p1: float = 0.02
    p2: float = 1.5
    p3: float = 0.05
    Gb: float = 110.0
    G0: float | None = None
    meals: tuple | None = None
    boluses: tuple | None = None
    basal_rate: float = 0.9
    start: float = DEFAULT_START
    dt: float = 300.0
    insulin: ActionProfile = field(default=INSULIN_PROFILE)
    carbs: ActionProfile = field(default=CARB_PROFILE)

    def __post_init__(self):
        if not self.p1 > 0:
            raise ValueError("p1 must be positive")
        if not 50 < self.Gb < 200:
            raise ValueError("Gb must lie in (50, 200)")
        if self.duration_hours < 4:
            raise ValueError("duration must be at least 4 hours")
        if self.noise_sd < 0 or self.basal_rate < 0:
            raise ValueError("noise_sd and basal_rate must be >= 0")
        meals, boluses = default_schedule(self.duration_hours)
        for name, default in (("meals", meals), ("boluses", boluses)):
            sched = getattr(self, name)
            sched = default if sched is None else sched
            sched = tuple((float(h), float(a)) for h, a in sched)
            for h, a in sched:
                if not 0 <= h < self.duration_hours:
                    raise ValueError(f"{name} event at {h} h lies outside the simulated duration")
                if a < 0:
                    raise ValueError(f"{name} amounts must be >= 0")
            object.__setattr__(self, name, sched)


@dataclass
class SynthDataset:
    dataset: AlignedDataset
    true_model: SparseModel
    events: list[EventRecord]


def philox_normals(seed: int, n: int) -> np.ndarray:
    # numpy increments the counter before each block, so start one below zero
    bitgen = np.random.Philox(key=seed, counter=[2**64 - 1] * 4)
    words = bitgen.random_raw(2 * ((n + 1) // 2))
    u = (words >> np.uint64(11)).astype(float) * 2.0**-53
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log1p(-u1))
    z = np.empty(u.size)
    z[0::2] = r * np.cos(2 * np.pi * u2)
    z[1::2] = r * np.sin(2 * np.pi * u2)
    return z[:n]


def true_model(config: SynthConfig) -> SparseModel:
    spec = LibrarySpec(("G", "I_act", "C_act"), poly_degree=2)
    terms = enumerate_terms(spec)
    coef = {"1": config.p1 * config.Gb, "G": -config.p1, "I_act": -config.p2, "C_act": config.p3}
    xi = np.array([[coef.get(term_to_string(t), 0.0)] for t in terms])
    return SparseModel(xi, terms, ("G",), ("I_act", "C_act"), StlsqConfig(), {})


def generate(config: SynthConfig = SynthConfig()) -> SynthDataset:
    dt_min = config.dt / 60.0
    n = int(round(config.duration_hours * 60 / dt_min))
    per_sample = int(round(dt_min / INTERNAL_STEP_MIN))
    h = dt_min / per_sample

    # doses sit on the grid, exactly where binning in align() puts them
    def snap(sched):
        return [(round(hour * 60 / dt_min) * dt_min, amount) for hour, amount in sched]

    meals, boluses = snap(config.meals), snap(config.boluses)
    # activity tabulated at every RK4 stage time (multiples of h/2)
    fine_t = np.arange(2 * n * per_sample + 1) * (h / 2)
    i_act = activity_at(config.insulin, [t for t, _ in boluses], [d for _, d in boluses], fine_t, dt_min)
    c_act = activity_at(config.carbs, [t for t, _ in meals], [d for _, d in meals], fine_t, dt_min)

    def rhs(t, g):
        k = int(round(t / (h / 2)))
        return -config.p1 * (g - config.Gb) - config.p2 * i_act[k] + config.p3 * c_act[k]

    g = np.array([config.Gb if config.G0 is None else config.G0])
    glucose = np.empty(n)
    glucose[0] = g[0]
    for step in range(1, (n - 1) * per_sample + 1):
        g = rk4_step(rhs, (step - 1) * h, g, h)
        if step % per_sample == 0:
            glucose[step // per_sample] = g[0]
    if config.noise_sd > 0:
        glucose = glucose + config.noise_sd * philox_normals(config.seed, n)
    glucose = np.round(glucose, 4)
    if not np.all((glucose > 20) & (glucose < 600)):
        raise ValueError("synthetic glucose left (20, 600) mg/dL; check the parameters")

    t_of = lambda minutes: config.start + minutes * 60.0  # noqa: E731
    events = [EventRecord(t_of(i * dt_min), "glucose", float(v)) for i, v in enumerate(glucose)]
    if config.basal_rate > 0:
        events.append(EventRecord(config.start, "basal", round(config.basal_rate, 4)))
    events += [EventRecord(t_of(t), "bolus", round(d, 4)) for t, d in boluses]
    events += [EventRecord(t_of(t), "carbs", round(c, 4)) for t, c in meals]
    events.sort(key=lambda r: (r.timestamp, r.kind))

    dataset = align(events, config.dt)
    dataset = dataset.with_controls(
        I_act=events_to_activity(dataset.channel("bolus"), config.insulin),
        C_act=events_to_activity(dataset.channel("carbs"), config.carbs),
    )
    return SynthDataset(dataset, true_model(config), events)


def write_synth(synth: SynthDataset, csv_path, model_path) -> None:
    write_events(csv_path, synth.events)
    atomic_write_text(model_path, json.dumps(model_to_dict(synth.true_model), indent=2) + "\n")
