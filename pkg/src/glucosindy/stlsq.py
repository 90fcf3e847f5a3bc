"""Sequentially thresholded least squares and the identified-model container."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
import numpy as np

from .fileio import atomic_write_text
from .library import FeatureMatrix, Term, term_to_string

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class ModelSchemaError(ValueError):
    pass


@dataclass(frozen=True)
class StlsqConfig:
    threshold: float = 0.15
    ridge: float = 1e-6
    max_iter: int = 20
    normalize_columns: bool = True

    def __post_init__(self):
        if self.threshold < 0 or self.ridge < 0:
            raise ValueError("threshold and ridge must be >= 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class SparseModel:
    xi: np.ndarray
    terms: tuple[Term, ...]
    state_names: tuple[str, ...]
    control_names: tuple[str, ...]
    config: StlsqConfig = field(default_factory=StlsqConfig)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float).reshape(len(self.terms), len(self.state_names))
        self.terms = tuple(self.terms)
        self.state_names = tuple(self.state_names)
        self.control_names = tuple(self.control_names)

    @property
    def support(self) -> list[set[str]]:
        """Names of the active terms, one set per state."""
        return [
            {term_to_string(t) for t, c in zip(self.terms, self.xi[:, j]) if c != 0}
            for j in range(len(self.state_names))
        ]

    @property
    def empty(self) -> bool:
        return not np.any(self.xi)

    def coefficient(self, term: str, state: str | None = None) -> float:
        j = 0 if state is None else self.state_names.index(state)
        names = [term_to_string(t) for t in self.terms]
        return float(self.xi[names.index(term), j])

    def __eq__(self, other):
        if not isinstance(other, SparseModel):
            return NotImplemented
        return (
            np.array_equal(self.xi, other.xi)
            and self.terms == other.terms
            and self.state_names == other.state_names
            and self.control_names == other.control_names
            and self.config == other.config
            and self.diagnostics == other.diagnostics
        )


def _solve(A: np.ndarray, y: np.ndarray, ridge: float) -> np.ndarray:
    # ridge via row augmentation, solved by SVD-based lstsq
    if ridge > 0:
        A = np.vstack([A, np.sqrt(ridge) * np.eye(A.shape[1])])
        y = np.concatenate([y, np.zeros(A.shape[1])])
    return np.linalg.lstsq(A, y, rcond=None)[0]


def column_scales(theta: np.ndarray) -> np.ndarray:
    """Root-mean-square of each column; all-zero columns get scale 1."""
    s = np.sqrt(np.mean(theta**2, axis=0))
    return np.where(s > 0, s, 1.0)


def stlsq_column(theta_n: np.ndarray, y: np.ndarray, config: StlsqConfig):
    """STLSQ on an already-scaled problem. Returns ``(coef, iterations)``."""
    n_terms = theta_n.shape[1]
    active = np.ones(n_terms, dtype=bool)
    coef = np.zeros(n_terms)
    coef[active] = _solve(theta_n, y, config.ridge)
    it = 0
    for it in range(1, config.max_iter + 1):
        keep = active & (np.abs(coef) >= config.threshold)
        changed = not np.array_equal(keep, active)
        active = keep
        coef = np.zeros(n_terms)
        if active.any():
            coef[active] = _solve(theta_n[:, active], y, config.ridge)
        if not changed:
            break
    return coef, it


def stlsq(
    theta: FeatureMatrix,
    dxdt: np.ndarray,
    config: StlsqConfig = StlsqConfig(),
    state_names=("G",),
    control_names=(),
) -> SparseModel:
    """Identify a sparse right-hand side ``dxdt ≈ theta @ xi`` column by column.

    Each pass solves the ridge problem on the current support, then drops
    every coefficient whose magnitude is below ``config.threshold``; with
    ``normalize_columns`` the comparison uses coefficients scaled by the
    column RMS. Iteration stops when the support is unchanged. A state with
    empty support is flagged in ``diagnostics["empty_support"]``.
    """
    A = theta.values
    dxdt = np.asarray(dxdt, dtype=float)
    if dxdt.ndim == 1:
        dxdt = dxdt[:, None]
    if A.shape[0] != dxdt.shape[0]:
        raise ValueError(f"row mismatch: theta has {A.shape[0]}, dxdt has {dxdt.shape[0]}")
    if dxdt.shape[1] != len(state_names):
        raise ValueError("dxdt columns must match state_names")
    if A.shape[0] < A.shape[1]:
        log.warning("fewer samples (%d) than library terms (%d)", A.shape[0], A.shape[1])

    scale = column_scales(A) if config.normalize_columns else np.ones(A.shape[1])
    A_n = A / scale
    xi = np.zeros((A.shape[1], dxdt.shape[1]))
    iterations, residual = [], []
    for j in range(dxdt.shape[1]):
        coef_n, it = stlsq_column(A_n, dxdt[:, j], config)
        xi[:, j] = coef_n / scale
        iterations.append(it)
        residual.append(float(np.sqrt(np.mean((A @ xi[:, j] - dxdt[:, j]) ** 2))))

    active = [int(np.count_nonzero(xi[:, j])) for j in range(xi.shape[1])]
    diagnostics = {
        "residual_rms": residual,
        "iterations": iterations,
        "active_terms": active,
        "empty_support": [n == 0 for n in active],
        "n_samples": int(A.shape[0]),
    }
    return SparseModel(xi, theta.terms, tuple(state_names), tuple(control_names), config, diagnostics)


def _format_coef(c: float) -> str:
    return f"{c:#.4g}".rstrip(".")


def model_to_equations(model: SparseModel) -> list[str]:
    lines = []
    for j, state in enumerate(model.state_names):
        parts = []
        for term, c in zip(model.terms, model.xi[:, j]):
            if c == 0:
                continue
            body = f"{_format_coef(abs(c))}·{term_to_string(term)}"
            if not parts:
                parts.append(body if c > 0 else f"-{body}")
            else:
                parts.append(f"{'+' if c > 0 else '-'} {body}")
        lines.append(f"d{state}/dt = {' '.join(parts) if parts else '0'}")
    return lines


def model_to_dict(model: SparseModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "states": list(model.state_names),
        "controls": list(model.control_names),
        "terms": [t.to_dict() for t in model.terms],
        "xi": model.xi.tolist(),
        "config": asdict(model.config),
        "diagnostics": model.diagnostics,
    }


def model_from_dict(d: dict) -> SparseModel:
    missing = [k for k in ("schema_version", "states", "controls", "terms", "xi", "config") if k not in d]
    if missing:
        raise ModelSchemaError(f"model file missing keys {missing}")
    if d["schema_version"] != SCHEMA_VERSION:
        raise ModelSchemaError(
            f"unsupported schema_version {d['schema_version']!r} (expected {SCHEMA_VERSION})"
        )
    try:
        terms = tuple(Term.from_dict(t) for t in d["terms"])
        xi = np.array(d["xi"], dtype=float)
        if xi.shape != (len(terms), len(d["states"])):
            raise ModelSchemaError(f"xi shape {xi.shape} does not match terms x states")
        return SparseModel(
            xi, terms, d["states"], d["controls"], StlsqConfig(**d["config"]), d.get("diagnostics", {})
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelSchemaError):
            raise
        raise ModelSchemaError(f"malformed model file: {exc}") from exc


def save_model(model: SparseModel, path) -> None:
    # json writes floats via repr, the shortest string that round-trips exactly
    atomic_write_text(path, json.dumps(model_to_dict(model), indent=2) + "\n")


def load_model(path) -> SparseModel:
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelSchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(d, dict):
        raise ModelSchemaError(f"{path}: top level must be an object")
    return model_from_dict(d)
