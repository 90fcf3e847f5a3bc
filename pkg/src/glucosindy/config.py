"""Pipeline configuration: one INI file, every key overridable as ``--section.key``.

Values are JSON literals (``0.15``, ``true``, ``["G", "I_act"]``, ``null``);
anything that does not parse as JSON is taken as a bare string.
"""

from __future__ import annotations

import configparser
import copy
import json
from dataclasses import dataclass

from .differentiation import DerivativeSpec
from .evaluation import EvalConfig
from .ingest import DEFAULT_DT, DEFAULT_MAX_GAP, parse_timestamp
from .insulin import CARB_PROFILE, INSULIN_PROFILE, ActionProfile
from .library import LibrarySpec
from .pipeline import DEFAULT_CHANNELS, FitConfig
from .simulate import SimConfig
from .stlsq import StlsqConfig
from .synth import SynthConfig


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, dict] = {
    "ingest": {"dt": DEFAULT_DT, "max_gap": DEFAULT_MAX_GAP},
    "derivative": {"scheme": "smoothed", "window": 7, "polyorder": 3},
    "library": {
        "channels": list(DEFAULT_CHANNELS),
        "poly_degree": 2,
        "include_trig": False,
        "trig_frequencies": [],
        "drop_constant_channels": True,
    },
    "insulin": {"tau1": INSULIN_PROFILE.tau1, "tau2": INSULIN_PROFILE.tau2},
    "carbs": {"tau1": CARB_PROFILE.tau1, "tau2": CARB_PROFILE.tau2},
    "stlsq": {"threshold": 0.15, "ridge": 1e-6, "max_iter": 20, "normalize_columns": True},
    "fit": {"train_fraction": 1.0},
    "simulation": {
        "substeps": 5,
        "control_interp": "linear",
        "interp_overrides": {"basal": "hold"},
        "clamp_min": None,
        "clamp_max": None,
    },
    "evaluation": {"horizon": 72, "origin_stride": 12, "split": 0.75},
    "synth": {
        "duration_hours": 48.0,
        "seed": 0,
        "noise_sd": 0.0,
        "p1": 0.02,
        "p2": 1.5,
        "p3": 0.05,
        "Gb": 110.0,
        "G0": None,
        "meals": None,
        "boluses": None,
        "basal_rate": 0.9,
        "start": "2020-01-01T00:00:00Z",
    },
}

# keys whose default is None but which take numbers or lists when set
_NULLABLE = {"clamp_min": (int, float), "clamp_max": (int, float), "G0": (int, float),
             "meals": (list,), "boluses": (list,)}


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text.strip()


def _check_type(section: str, key: str, value, default):
    where = f"{section}.{key}"
    if value is None:
        if default is None:
            return None
        raise ConfigError(f"{where} may not be null")
    if default is None:
        if not isinstance(value, _NULLABLE[key]):
            raise ConfigError(f"{where} has the wrong type")
        return value
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    else:
        ok = isinstance(value, type(default))
    if not ok:
        raise ConfigError(f"{where} expects {type(default).__name__}, got {value!r}")
    return value


def merge(raw: dict, overrides: dict[str, str] | None = None) -> dict:
    """Overlay parsed file sections and dotted overrides on the defaults."""
    merged = copy.deepcopy(DEFAULTS)
    updates = [(s, k, v) for s, kv in raw.items() for k, v in kv.items()]
    for dotted, text in (overrides or {}).items():
        if "." not in dotted:
            raise ConfigError(f"override {dotted!r} must look like section.key")
        s, k = dotted.split(".", 1)
        updates.append((s, k, parse_value(text) if isinstance(text, str) else text))
    for s, k, v in updates:
        if s not in merged:
            raise ConfigError(f"unknown config section {s!r}")
        if k not in merged[s]:
            raise ConfigError(f"unknown config key {s}.{k}")
        merged[s][k] = _check_type(s, k, v, DEFAULTS[s][k])
    return merged


def read_file(path) -> dict:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive (Gb, G0)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return {s: {k: parse_value(v) for k, v in parser.items(s)} for s in parser.sections()}


@dataclass(frozen=True)
class PipelineConfig:
    dt: float
    max_gap: float
    insulin: ActionProfile
    carbs: ActionProfile
    fit: FitConfig
    simulation: SimConfig
    evaluation: EvalConfig
    synth: SynthConfig
    raw: dict

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        try:
            lib = d["library"]
            fit = FitConfig(
                derivative=DerivativeSpec(**d["derivative"]),
                library=LibrarySpec(tuple(lib["channels"]), lib["poly_degree"], lib["include_trig"],
                                    tuple(lib["trig_frequencies"])),
                stlsq=StlsqConfig(**d["stlsq"]),
                train_fraction=d["fit"]["train_fraction"],
                drop_constant_channels=lib["drop_constant_channels"],
            )
            insulin = ActionProfile(**d["insulin"])
            carbs = ActionProfile(**d["carbs"])
            sy = dict(d["synth"])
            sy["start"] = parse_timestamp(sy["start"])
            for k in ("meals", "boluses"):
                if sy[k] is not None:
                    sy[k] = tuple(tuple(e) for e in sy[k])
            synth = SynthConfig(dt=d["ingest"]["dt"], insulin=insulin, carbs=carbs, **sy)
            if d["ingest"]["dt"] <= 0 or d["ingest"]["max_gap"] < 0:
                raise ValueError("ingest.dt must be positive and ingest.max_gap non-negative")
            return cls(
                dt=d["ingest"]["dt"],
                max_gap=d["ingest"]["max_gap"],
                insulin=insulin,
                carbs=carbs,
                fit=fit,
                simulation=SimConfig(**d["simulation"]),
                evaluation=EvalConfig(**d["evaluation"]),
                synth=synth,
                raw=d,
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


def load_config(path=None, overrides: dict[str, str] | None = None) -> PipelineConfig:
    raw = read_file(path) if path is not None else {}
    return PipelineConfig.from_dict(merge(raw, overrides))


def default_config_text() -> str:
    """The full default configuration as INI text."""
    lines = []
    for section, kv in DEFAULTS.items():
        lines.append(f"[{section}]")
        lines += [f"{k} = {json.dumps(v)}" for k, v in kv.items()]
        lines.append("")
    return "\n".join(lines)

