"""Candidate right-hand-side terms and the feature matrix built from them."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Mapping

import numpy as np

from .series import AlignedDataset


@dataclass(frozen=True)
class Term:
    """One library column: ``constant``, ``monomial`` or ``trig``.

    ``exponents`` is a sorted tuple of ``(channel, power)`` pairs for
    monomials. Trig terms use ``func`` (``sin``/``cos``), ``omega`` and
    ``channel``.
    """

    kind: str
    exponents: tuple[tuple[str, int], ...] = ()
    func: str = ""
    omega: float = 0.0
    channel: str = ""

    def __post_init__(self):
        if self.kind == "constant":
            if self.exponents or self.func or self.channel or self.omega:
                raise ValueError("constant term takes no parameters")
        elif self.kind == "monomial":
            if self.func or self.channel or self.omega:
                raise ValueError("monomial term takes only exponents")
            if any(p < 0 for _, p in self.exponents) or sum(p for _, p in self.exponents) < 1:
                raise ValueError("monomial needs non-negative exponents with total degree >= 1")
        elif self.kind == "trig":
            if self.exponents or self.func not in ("sin", "cos") or not self.omega > 0 or not self.channel:
                raise ValueError("trig term needs func sin|cos, omega > 0 and a channel")
        else:
            raise ValueError(f"unknown term kind {self.kind!r}")

    @classmethod
    def constant(cls) -> "Term":
        return cls("constant")

    @classmethod
    def monomial(cls, exponents: Mapping[str, int]) -> "Term":
        return cls("monomial", tuple((k, int(v)) for k, v in exponents.items() if v))

    @classmethod
    def trig(cls, func: str, omega: float, channel: str) -> "Term":
        return cls("trig", func=func, omega=float(omega), channel=channel)

    @property
    def channels(self) -> tuple[str, ...]:
        if self.kind == "monomial":
            return tuple(c for c, _ in self.exponents)
        if self.kind == "trig":
            return (self.channel,)
        return ()

    def evaluate(self, values: Mapping[str, np.ndarray | float]):
        if self.kind == "constant":
            ref = next(iter(values.values()), 1.0) if values else 1.0
            return np.ones_like(np.asarray(ref, dtype=float))
        if self.kind == "monomial":
            out = 1.0
            for c, p in self.exponents:
                out = out * (values[c] if p == 1 else values[c] ** p)
            return np.asarray(out, dtype=float)
        f = np.sin if self.func == "sin" else np.cos
        return f(self.omega * np.asarray(values[self.channel], dtype=float))

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant"}
        if self.kind == "monomial":
            return {"kind": "monomial", "exponents": dict(self.exponents)}
        return {"kind": "trig", "func": self.func, "omega": self.omega, "channel": self.channel}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Term":
        kind = d["kind"]
        if kind == "constant":
            return cls.constant()
        if kind == "monomial":
            return cls("monomial", tuple((str(k), int(v)) for k, v in d["exponents"].items()))
        if kind == "trig":
            return cls.trig(d["func"], d["omega"], d["channel"])
        raise ValueError(f"unknown term kind {kind!r}")


def term_to_string(term: Term) -> str:
    if term.kind == "constant":
        return "1"
    if term.kind == "monomial":
        return "·".join(c if p == 1 else f"{c}^{p}" for c, p in term.exponents)
    return f"{term.func}({term.omega!r}·{term.channel})"


@dataclass(frozen=True)
class LibrarySpec:
    channels: tuple[str, ...]
    poly_degree: int = 2
    include_trig: bool = False
    trig_frequencies: tuple[float, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "trig_frequencies", tuple(float(w) for w in self.trig_frequencies))
        if len(set(self.channels)) != len(self.channels):
            raise ValueError("channel names must be unique")
        if self.poly_degree < 0:
            raise ValueError("poly_degree must be >= 0")
        if self.include_trig and not self.trig_frequencies:
            raise ValueError("trig_frequencies must be non-empty when include_trig is set")
        if any(not w > 0 for w in self.trig_frequencies):
            raise ValueError("trig frequencies must be positive")


def enumerate_terms(spec: LibrarySpec) -> list[Term]:
    """Constant, then monomials by degree in lexicographic channel order, then trig.

    Within a degree, ``combinations_with_replacement`` over the ordered
    channel list yields ``G^2, G·I, I^2`` for channels ``[G, I]``.
    """
    terms = [Term.constant()]
    for degree in range(1, spec.poly_degree + 1):
        for combo in combinations_with_replacement(spec.channels, degree):
            powers: dict[str, int] = {}
            for c in combo:
                powers[c] = powers.get(c, 0) + 1
            terms.append(Term.monomial(powers))
    if spec.include_trig:
        for c in spec.channels:
            for w in spec.trig_frequencies:
                terms.append(Term.trig("sin", w, c))
                terms.append(Term.trig("cos", w, c))
    return terms


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    terms: tuple[Term, ...]

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.terms):
            raise ValueError("feature matrix columns must match the term list")

    @property
    def names(self) -> list[str]:
        return [term_to_string(t) for t in self.terms]


def evaluate_terms(terms, values: Mapping[str, np.ndarray]) -> np.ndarray:
    """Stack term evaluations column-wise for aligned channel arrays."""
    n = len(next(iter(values.values())))
    cols = [np.broadcast_to(t.evaluate(values), (n,)) for t in terms]
    return np.column_stack(cols) if cols else np.empty((n, 0))


def build_matrix(dataset: AlignedDataset, spec: LibrarySpec, segment: tuple[int, int]) -> FeatureMatrix:
    a, b = segment
    if not 0 <= a < b <= dataset.grid.n:
        raise IndexError(f"segment [{a}, {b}) out of bounds for grid of {dataset.grid.n}")
    values = {c: dataset.channel(c).values[a:b] for c in spec.channels}
    terms = tuple(enumerate_terms(spec))
    return FeatureMatrix(evaluate_terms(terms, values), terms)
