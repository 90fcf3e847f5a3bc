import json
import math

import numpy as np
import pytest

from glucosindy.ingest import load_events
from glucosindy.pipeline import FitConfig, fit, prepare_dataset
from glucosindy.stlsq import StlsqConfig, load_model
from glucosindy.synth import SynthConfig, default_schedule, generate, philox_normals, write_synth

MASK = 2**64 - 1
TRUE_SUPPORT = {"1", "G", "I_act", "C_act"}


def philox4x64(counter, key):
    """Pure-Python Philox4x64-10, written from the published round function."""
    m0, m1 = 0xD2E7470EE14C6C93, 0xCA5A826395121157
    w0, w1 = 0x9E3779B97F4A7C15, 0xBB67AE8584CAA73B
    c, k = list(counter), list(key)
    for r in range(10):
        if r:
            k = [(k[0] + w0) & MASK, (k[1] + w1) & MASK]
        p0, p1 = m0 * c[0], m1 * c[2]
        c = [(p1 >> 64) ^ c[1] ^ k[0], p1 & MASK, (p0 >> 64) ^ c[3] ^ k[1], p0 & MASK]
    return c


def reference_normals(seed, n):
    words = []
    block = 0
    while len(words) < n + 1:
        words += philox4x64((block, 0, 0, 0), (seed & MASK, seed >> 64))
        block += 1
    u = [(w >> 11) * 2.0**-53 for w in words]
    out = []
    for u1, u2 in zip(u[0::2], u[1::2]):
        r = math.sqrt(-2.0 * math.log(1.0 - u1))
        out += [r * math.cos(2 * math.pi * u2), r * math.sin(2 * math.pi * u2)]
    return out[:n]


def test_philox_known_answer():
    # Random123 known-answer vector, zero key and counter
    assert philox4x64((0, 0, 0, 0), (0, 0)) == [
        0x16554D9ECA36314C, 0xDB20FE9D672D0FDC, 0xD7E772CEE186176B, 0x7E68B68AEC7BA23B,
    ]


@pytest.mark.parametrize("seed", [0, 1, 12345, 2**40 + 7])
def test_noise_stream_matches_reference(seed):
    np.testing.assert_allclose(philox_normals(seed, 11), reference_normals(seed, 11), rtol=1e-13, atol=1e-15)


def test_noise_stream_frozen_values():
    np.testing.assert_allclose(
        philox_normals(0, 6), [0.2639364, -0.33600634, -1.92409872, 0.0751707, 0.0080887, 0.15219213], atol=5e-9
    )


def test_no_events_stays_at_basal_glucose():
    synth = generate(SynthConfig(duration_hours=6, meals=(), boluses=()))
    np.testing.assert_array_equal(synth.dataset.channel("G").values, 110.0)


def test_single_bolus_drives_glucose_down():
    synth = generate(SynthConfig(duration_hours=12, p3=0.0, meals=(), boluses=((2.0, 5.0),)))
    g = synth.dataset.channel("G").values
    onset = 24  # bolus bin; activity is zero there and positive afterwards
    low = int(np.argmin(g))
    np.testing.assert_array_equal(g[: onset + 1], 110.0)
    assert low > onset + 6
    assert np.all(np.diff(g[onset : low + 1]) < 0)
    assert np.all(np.diff(g[low:]) >= 0)


def test_same_seed_is_bit_identical():
    a = generate(SynthConfig(noise_sd=2.0, seed=4))
    b = generate(SynthConfig(noise_sd=2.0, seed=4))
    assert a.events == b.events
    assert a.dataset.channel("G").values.tobytes() == b.dataset.channel("G").values.tobytes()
    c = generate(SynthConfig(noise_sd=2.0, seed=5))
    assert not np.array_equal(a.dataset.channel("G").values, c.dataset.channel("G").values)


def test_noise_only_touches_glucose():
    clean = generate(SynthConfig())
    noisy = generate(SynthConfig(noise_sd=2.0, seed=1))
    diff = noisy.dataset.channel("G").values - clean.dataset.channel("G").values
    assert 1.5 < np.std(diff) < 2.5
    for name in ("basal", "bolus", "carbs", "I_act", "C_act"):
        assert noisy.dataset.channel(name) == clean.dataset.channel(name)


def test_glucose_within_sanity_range(clean_patient):
    g = clean_patient.dataset.channel("G").values
    assert 20 < g.min() and g.max() < 600
    # excursions are large enough to separate the terms
    assert g.max() - g.min() > 100


def test_true_model_structure(clean_patient):
    model = clean_patient.true_model
    assert model.support == [TRUE_SUPPORT]
    assert model.coefficient("1") == pytest.approx(0.02 * 110)
    assert model.coefficient("G") == -0.02
    assert model.coefficient("I_act") == -1.5
    assert model.coefficient("C_act") == 0.05
    assert len(model.terms) == 10  # degree-2 library over G, I_act, C_act


@pytest.mark.parametrize("threshold", [0.05, 0.15])
def test_noise_free_recovery(clean_patient, threshold):
    model = fit(clean_patient.dataset, FitConfig(stlsq=StlsqConfig(threshold=threshold)))
    assert model.support == [TRUE_SUPPORT]
    truth = clean_patient.true_model
    for term in TRUE_SUPPORT:
        rel = abs(model.coefficient(term) / truth.coefficient(term) - 1)
        assert rel < 0.01, term


def test_csv_round_trip(tmp_path, clean_patient):
    write_synth(clean_patient, tmp_path / "s.csv", tmp_path / "m.json")
    events, report = load_events(tmp_path / "s.csv")
    assert report.n_dropped == 0
    assert events == clean_patient.events
    ds = prepare_dataset(events)
    for name, series in clean_patient.dataset.channels.items():
        assert ds.channel(name) == series
    assert ds.segments == clean_patient.dataset.segments == ((0, 576),)
    assert load_model(tmp_path / "m.json") == clean_patient.true_model


def test_csv_bytes_reproducible(tmp_path):
    for d in ("a", "b"):
        (tmp_path / d).mkdir()
        write_synth(generate(SynthConfig(noise_sd=2.0, seed=9)), tmp_path / d / "s.csv", tmp_path / d / "m.json")
    assert (tmp_path / "a" / "s.csv").read_bytes() == (tmp_path / "b" / "s.csv").read_bytes()
    assert json.loads((tmp_path / "a" / "m.json").read_text())["schema_version"] == 1


def test_schedule_repeats_for_long_runs():
    meals, boluses = default_schedule(100.0)
    assert len(meals) == 14 and meals[7] == (54.5, 490.0)  # third block starts past 100 h
    assert all(h < 100 for h, _ in meals + boluses)


@pytest.mark.parametrize("kwargs,match", [
    ({"meals": ((50.0, 30.0),)}, "outside"),
    ({"boluses": ((-1.0, 3.0),)}, "outside"),
    ({"boluses": ((1.0, -3.0),)}, ">= 0"),
    ({"p1": 0.0}, "p1"),
    ({"Gb": 220.0}, "Gb"),
    ({"duration_hours": 3.5}, "duration"),
    ({"noise_sd": -1.0}, "noise_sd"),
])
def test_config_errors(kwargs, match):
    with pytest.raises(ValueError, match=match):
        SynthConfig(**kwargs)


def test_implausible_parameters_flagged():
    with pytest.raises(ValueError, match="20, 600"):
        generate(SynthConfig(p2=50.0))
