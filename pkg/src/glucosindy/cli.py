"""Command-line driver: ``synth``, ``fit``, ``predict``, ``evaluate``.

Every configuration key can be overridden with ``--section.key VALUE``.
Exit codes: 0 success, 1 usage/config error, 2 degenerate result,
3 I/O or data-file error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, PipelineConfig, default_config_text, load_config
from .evaluation import rolling_evaluate
from .fileio import atomic_write_text
from .ingest import IngestError, load_events, parse_timestamp
from .pipeline import fit, prepare_dataset
from .simulate import forecast_to_csv, simulate
from .stlsq import ModelSchemaError, load_model, model_to_equations, save_model
from .synth import generate, write_synth

log = logging.getLogger("glucosindy")

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _load_dataset(path, cfg: PipelineConfig, report_path=None):
    events, report = load_events(path, gap_threshold=cfg.max_gap)
    if report.n_dropped:
        log.warning("%s: dropped %d malformed rows", path, report.n_dropped)
    if report_path:
        atomic_write_text(report_path, report.to_json() + "\n")
    return prepare_dataset(events, cfg.dt, cfg.max_gap, cfg.insulin, cfg.carbs)


def cmd_synth(args, cfg: PipelineConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    synth = generate(cfg.synth)
    write_synth(synth, out / "synth.csv", out / "true_model.json")
    print(f"wrote {out / 'synth.csv'} and {out / 'true_model.json'}")
    for line in model_to_equations(synth.true_model):
        print(line)
    return EXIT_OK


def cmd_fit(args, cfg: PipelineConfig) -> int:
    dataset = _load_dataset(args.data, cfg, args.report)
    model = fit(dataset, cfg.fit)
    save_model(model, args.model_out)
    for line in model_to_equations(model):
        print(line)
    if all(model.diagnostics["empty_support"]):
        print("error: every state has an empty support", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


def cmd_predict(args, cfg: PipelineConfig) -> int:
    model = load_model(args.model)
    dataset = _load_dataset(args.data, cfg)
    grid = dataset.grid
    origin = grid.index_of(parse_timestamp(args.origin))
    if not 0 <= origin < grid.n:
        raise UsageError(f"origin {args.origin} lies outside the data")
    if origin + args.horizon >= grid.n:
        raise UsageError(
            f"horizon of {args.horizon} steps from {args.origin} extends past the end of the data "
            f"({grid.n - 1 - origin} steps available)"
        )
    state = model.state_names[0]
    g = dataset.channel(state).values
    if not np.isfinite(g[origin]):
        raise UsageError(f"no glucose observation at origin {args.origin} (inside a data gap)")
    end = origin + args.horizon + 1
    controls = {c: dataset.channel(c).values[origin:end] for c in model.control_names}
    fc = simulate(model, [g[origin]], controls, args.horizon, cfg.simulation, grid.dt, grid.time(origin))
    atomic_write_text(args.out, forecast_to_csv(fc, {state: g[origin:end]}))
    print(f"wrote {args.out} ({fc.status})")
    return EXIT_OK


def cmd_evaluate(args, cfg: PipelineConfig) -> int:
    model = load_model(args.model)
    dataset = _load_dataset(args.data, cfg)
    try:
        report = rolling_evaluate(model, dataset, cfg.evaluation, cfg.simulation)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    atomic_write_text(args.report_out, report.to_json())
    origins_out = args.origins_out or str(Path(args.report_out).with_suffix(".csv"))
    atomic_write_text(origins_out, report.origins_csv())
    print(f"origins: {report.n_origins} (diverged {report.n_diverged}, excluded {report.n_excluded})")
    print(f"model RMSE    {report.rmse:.4f} mg/dL   MAE {report.mae:.4f}")
    print(f"baseline RMSE {report.baseline_rmse:.4f} mg/dL   MAE {report.baseline_mae:.4f}")
    return EXIT_OK


def cmd_config(args, cfg: PipelineConfig) -> int:
    print(default_config_text(), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(
        prog="glucosindy",
        description="Sparse ODE identification for glucose forecasting.",
        epilog="Any configuration key may be overridden as --section.key VALUE.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic patient CSV and its true model")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("fit", parents=[common], help="identify a model from an event CSV")
    s.add_argument("data")
    s.add_argument("--model-out", required=True)
    s.add_argument("--report", help="write the ingest report JSON here")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("predict", parents=[common], help="forecast from one origin")
    s.add_argument("model")
    s.add_argument("data")
    s.add_argument("--origin", required=True, help="ISO-8601 origin timestamp")
    s.add_argument("--horizon", type=int, default=72, help="grid steps (default 72 = 6 h)")
    s.add_argument("--out", required=True, help="forecast CSV")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("evaluate", parents=[common], help="rolling-origin evaluation vs persistence")
    s.add_argument("model")
    s.add_argument("data")
    s.add_argument("--report-out", required=True, help="EvalReport JSON")
    s.add_argument("--origins-out", help="per-origin CSV (default: report path with .csv)")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("config", parents=[common], help="print the default configuration")
    s.set_defaults(func=cmd_config)
    return p


def split_overrides(argv: list[str]) -> tuple[list[str], dict[str, str]]:
    """Pull ``--section.key=VALUE`` / ``--section.key VALUE`` out of ``argv``."""
    rest: list[str] = []
    out: dict[str, str] = {}
    i = 0
    while i < len(argv):
        tok = argv[i]
        key = tok[2:].split("=", 1)[0]
        if tok.startswith("--") and "." in key:
            if "=" in tok:
                value = tok.split("=", 1)[1]
            elif i + 1 < len(argv):
                value = argv[i + 1]
                i += 1
            else:
                raise UsageError(f"override {tok} needs a value")
            out[key] = value
        else:
            rest.append(tok)
        i += 1
    return rest, out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv, overrides = split_overrides(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        cfg = load_config(args.config, overrides)
        return args.func(args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IngestError, ModelSchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
