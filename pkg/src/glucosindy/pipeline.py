"""End-to-end identification: events -> activities -> derivatives -> library -> STLSQ."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .differentiation import DerivativeSpec, differentiate_values
from .ingest import DEFAULT_DT, DEFAULT_MAX_GAP, align
from .insulin import CARB_PROFILE, INSULIN_PROFILE, ActionProfile, events_to_activity
from .library import FeatureMatrix, LibrarySpec, enumerate_terms, evaluate_terms
from .series import AlignedDataset
from .stlsq import SparseModel, StlsqConfig, stlsq

log = logging.getLogger(__name__)

STATE = "G"
DEFAULT_CHANNELS = ("G", "I_act", "C_act", "basal")


@dataclass(frozen=True)
class FitConfig:
    derivative: DerivativeSpec = field(default_factory=DerivativeSpec)
    library: LibrarySpec = field(default_factory=lambda: LibrarySpec(DEFAULT_CHANNELS, poly_degree=2))
    stlsq: StlsqConfig = field(default_factory=StlsqConfig)
    train_fraction: float = 1.0
    drop_constant_channels: bool = True

    def __post_init__(self):
        if not 0 < self.train_fraction <= 1:
            raise ValueError("train_fraction must lie in (0, 1]")
        if not self.library.channels or self.library.channels[0] != STATE:
            raise ValueError(f"library channels must start with the state {STATE!r}")


def prepare_dataset(
    events,
    dt: float = DEFAULT_DT,
    max_gap: float = DEFAULT_MAX_GAP,
    insulin: ActionProfile = INSULIN_PROFILE,
    carbs: ActionProfile = CARB_PROFILE,
) -> AlignedDataset:
    """Align events and add the ``I_act`` and ``C_act`` activity channels."""
    ds = align(events, dt, max_gap)
    return ds.with_controls(
        I_act=events_to_activity(ds.channel("bolus"), insulin),
        C_act=events_to_activity(ds.channel("carbs"), carbs),
    )


def train_segments(dataset: AlignedDataset, fraction: float) -> list[tuple[int, int]]:
    """Leading ``fraction`` of every segment, chronological."""
    out = []
    for a, b in dataset.segments:
        stop = b if fraction >= 1 else a + int(np.floor(fraction * (b - a)))
        if stop - a >= 2:
            out.append((a, stop))
    return out


def regression_data(dataset: AlignedDataset, config: FitConfig):
    """Stacked feature matrix and state derivatives over the training rows.

    Segments shorter than the derivative stencil are skipped. Controls that
    are constant across all training rows duplicate the constant term and
    are removed from the library when ``drop_constant_channels`` is set.
    """
    segments = [
        (a, b) for a, b in train_segments(dataset, config.train_fraction)
        if b - a >= config.derivative.min_length
    ]
    if not segments:
        raise ValueError("no training segment is long enough for the derivative stencil")
    dt_min = dataset.grid.dt / 60.0
    rows = np.concatenate([np.arange(a, b) for a, b in segments])

    channels = list(config.library.channels)
    if config.drop_constant_channels:
        for c in channels[1:]:
            v = dataset.channel(c).values[rows]
            if np.all(v == v[0]):
                log.warning("dropping control %r: constant over the training data", c)
                channels.remove(c)
    spec = LibrarySpec(tuple(channels), config.library.poly_degree,
                       config.library.include_trig, config.library.trig_frequencies)
    terms = tuple(enumerate_terms(spec))

    g = dataset.channel(STATE).values
    dxdt = np.concatenate([differentiate_values(g[a:b], dt_min, config.derivative) for a, b in segments])
    values = {c: dataset.channel(c).values[rows] for c in channels}
    theta = FeatureMatrix(evaluate_terms(terms, values), terms)
    return theta, dxdt, spec


def fit(dataset: AlignedDataset, config: FitConfig = FitConfig()) -> SparseModel:
    theta, dxdt, spec = regression_data(dataset, config)
    return stlsq(theta, dxdt, config.stlsq, (STATE,), spec.channels[1:])
