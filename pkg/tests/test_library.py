import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from glucosindy.library import (
    LibrarySpec,
    Term,
    build_matrix,
    enumerate_terms,
    evaluate_terms,
    term_to_string,
)
from glucosindy.series import AlignedDataset, Grid, make_series


def names(spec):
    return [term_to_string(t) for t in enumerate_terms(spec)]


def dataset(**channels):
    n = len(next(iter(channels.values())))
    grid = Grid(0.0, 300.0, n)
    series = {k: make_series(0, 300, v) for k, v in channels.items()}
    state = {"G": series.pop("G")}
    return AlignedDataset(grid, state, series, ((0, n),) if n >= 2 else ())


def test_degree_one_basis():
    assert names(LibrarySpec(("G", "I"), 1)) == ["1", "G", "I"]


def test_degree_two_graded_lex():
    assert names(LibrarySpec(("G", "I"), 2)) == ["1", "G", "I", "G^2", "G·I", "I^2"]


def test_trig_only_library():
    spec = LibrarySpec(("G",), 0, include_trig=True, trig_frequencies=(1.0,))
    assert names(spec) == ["1", "sin(1.0·G)", "cos(1.0·G)"]


def test_trig_ordering_per_channel_per_frequency():
    spec = LibrarySpec(("G", "I"), 1, include_trig=True, trig_frequencies=(0.5, 2.0))
    assert names(spec)[3:] == [
        "sin(0.5·G)", "cos(0.5·G)", "sin(2.0·G)", "cos(2.0·G)",
        "sin(0.5·I)", "cos(0.5·I)", "sin(2.0·I)", "cos(2.0·I)",
    ]


def test_direct_row_evaluation():
    fm = build_matrix(dataset(G=[2.0], I=[3.0]), LibrarySpec(("G", "I"), 2), (0, 1))
    np.testing.assert_array_equal(fm.values, [[1, 2, 3, 4, 6, 9]])
    assert fm.names == ["1", "G", "I", "G^2", "G·I", "I^2"]


@pytest.mark.parametrize("degree", [0, 1, 2, 3])
def test_zero_input(degree):
    ds = dataset(G=np.zeros(4), I=np.zeros(4), C=np.zeros(4))
    fm = build_matrix(ds, LibrarySpec(("G", "I", "C"), degree), (0, 4))
    np.testing.assert_array_equal(fm.values[:, 0], 1.0)
    np.testing.assert_array_equal(fm.values[:, 1:], 0.0)


def test_trig_at_zero():
    spec = LibrarySpec(("G",), 0, include_trig=True, trig_frequencies=(1.0,))
    fm = build_matrix(dataset(G=[0.0]), spec, (0, 1))
    np.testing.assert_array_equal(fm.values, [[1, 0, 1]])


def test_term_strings():
    assert term_to_string(Term.constant()) == "1"
    assert term_to_string(Term.monomial({"G": 2})) == "G^2"
    assert term_to_string(Term.monomial({"G": 2, "I_bolus": 1})) == "G^2·I_bolus"
    assert term_to_string(Term.trig("sin", 0.5, "G")) == "sin(0.5·G)"


@pytest.mark.parametrize("c,d", list(itertools.product(range(1, 5), range(0, 4))))
def test_polynomial_count_matches_direct_enumeration(c, d):
    channels = tuple(f"x{i}" for i in range(c))
    terms = enumerate_terms(LibrarySpec(channels, d))
    direct = {e for e in itertools.product(range(d + 1), repeat=c) if sum(e) <= d}
    got = {tuple(dict(t.exponents).get(ch, 0) for ch in channels) for t in terms}
    assert len(terms) == math.comb(c + d, d) == len(direct)
    assert got == direct


def test_enumeration_is_deterministic():
    spec = LibrarySpec(("G", "I_act", "C_act", "basal"), 3, True, (0.1, 1.0))
    assert enumerate_terms(spec) == enumerate_terms(LibrarySpec(("G", "I_act", "C_act", "basal"), 3, True, (0.1, 1.0)))


def eval_expression(text, values):
    """Independent evaluator for rendered term strings."""
    expr = text.replace("·", "*").replace("^", "**")
    return eval(expr, {"__builtins__": {}, "sin": math.sin, "cos": math.cos}, dict(values))


channel_values = st.fixed_dictionaries({
    "G": st.floats(-300, 300), "I_act": st.floats(-5, 5), "C_act": st.floats(0, 50),
})


@given(st.lists(channel_values, min_size=1, max_size=8))
def test_matrix_matches_symbolic_evaluation(rows):
    spec = LibrarySpec(("G", "I_act", "C_act"), 3, include_trig=True, trig_frequencies=(0.05, 1.0))
    ds = dataset(**{k: [r[k] for r in rows] for k in ("G", "I_act", "C_act")})
    fm = build_matrix(ds, spec, (0, len(rows)))
    for i, row in enumerate(rows):
        expected = [eval_expression(name, row) for name in fm.names]
        np.testing.assert_allclose(fm.values[i], expected, rtol=1e-12, atol=1e-12)


def test_unknown_channel():
    with pytest.raises(KeyError, match="unknown channel"):
        build_matrix(dataset(G=[1.0, 2.0]), LibrarySpec(("G", "I"), 1), (0, 2))


@pytest.mark.parametrize("segment", [(0, 3), (-1, 1), (1, 1)])
def test_segment_out_of_bounds(segment):
    with pytest.raises(IndexError):
        build_matrix(dataset(G=[1.0, 2.0]), LibrarySpec(("G",), 1), segment)


@pytest.mark.parametrize("kwargs", [
    {"channels": ("G", "G")},
    {"channels": ("G",), "poly_degree": -1},
    {"channels": ("G",), "include_trig": True},
    {"channels": ("G",), "include_trig": True, "trig_frequencies": (0.0,)},
])
def test_spec_invariants(kwargs):
    with pytest.raises(ValueError):
        LibrarySpec(**kwargs)


@pytest.mark.parametrize("bad", [
    dict(kind="constant", func="sin"),
    dict(kind="monomial"),
    dict(kind="monomial", exponents=(("G", -1), ("I", 2))),
    dict(kind="trig", func="tan", omega=1.0, channel="G"),
    dict(kind="trig", func="sin", omega=-1.0, channel="G"),
    dict(kind="rational"),
])
def test_term_invariants(bad):
    with pytest.raises(ValueError):
        Term(**bad)


def test_term_dict_round_trip():
    spec = LibrarySpec(("G", "I_act"), 2, include_trig=True, trig_frequencies=(0.3,))
    for t in enumerate_terms(spec):
        assert Term.from_dict(t.to_dict()) == t


def test_constant_column_shape_matches_rows():
    values = {"G": np.arange(5.0)}
    m = evaluate_terms([Term.constant(), Term.monomial({"G": 1})], values)
    assert m.shape == (5, 2)
    np.testing.assert_array_equal(m[:, 0], 1.0)
