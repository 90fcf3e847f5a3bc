"""Event-level CSV records and their alignment onto the CGM grid.

Input format: UTF-8 CSV with header ``timestamp,kind,value``. Timestamps are
ISO-8601; an explicit offset is honoured, naive timestamps are read as UTC.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .fileio import atomic_write_text
from .series import AlignedDataset, Grid, UniformSeries

KINDS = ("glucose", "basal", "bolus", "carbs")
REQUIRED_COLUMNS = ("timestamp", "kind", "value")
UNITS = {"glucose": "mg/dL", "basal": "U/hr", "bolus": "U", "carbs": "g"}

DEFAULT_DT = 300.0
DEFAULT_MAX_GAP = 1800.0


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class EventRecord:
    timestamp: float
    kind: str
    value: float


@dataclass
class IngestReport:
    n_records: dict[str, int] = field(default_factory=lambda: {k: 0 for k in KINDS})
    n_gaps: int = 0
    gap_spans: list[tuple[float, float]] = field(default_factory=list)
    n_dropped: int = 0
    dropped: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def parse_timestamp(text: str) -> float:
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.timestamp()


def format_timestamp(t: float) -> str:
    return datetime.fromtimestamp(t, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _validate(kind: str, value: float) -> str | None:
    if not math.isfinite(value):
        return "non-finite value"
    if kind == "glucose":
        if not 0 < value < 1000:
            return "glucose out of range"
    elif value < 0:
        return "negative rate" if kind == "basal" else "negative dose"
    return None


def load_events(path, gap_threshold: float = DEFAULT_MAX_GAP):
    """Read an event CSV.

    Malformed rows are dropped and recorded in the report with a reason.
    Glucose intervals longer than ``gap_threshold`` seconds are reported as
    gaps. Returns ``(records, report)`` with records sorted by timestamp.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = [h.strip() for h in (reader.fieldnames or [])]
            missing = [c for c in REQUIRED_COLUMNS if c not in header]
            if missing:
                raise IngestError(f"{path}: header missing required columns {missing}")
            reader.fieldnames = header
            rows = list(reader)
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc

    report = IngestReport()
    records = []
    for lineno, row in enumerate(rows, start=2):
        reason = None
        try:
            t = parse_timestamp(row["timestamp"] or "")
        except (ValueError, TypeError):
            reason = "malformed timestamp"
        kind = (row["kind"] or "").strip().lower()
        if reason is None and kind not in KINDS:
            reason = "unknown kind"
        if reason is None:
            try:
                value = float(row["value"])
            except (ValueError, TypeError):
                reason = "malformed value"
            else:
                reason = _validate(kind, value)
        if reason is not None:
            report.dropped.append({"line": lineno, "reason": reason})
            continue
        records.append(EventRecord(t, kind, value))

    report.n_dropped = len(report.dropped)
    if not records:
        raise IngestError(f"{path}: no parsable rows")
    # stable sort: equal timestamps keep file order
    records.sort(key=lambda r: r.timestamp)
    counts = Counter(r.kind for r in records)
    report.n_records = {k: counts.get(k, 0) for k in KINDS}

    glucose_t = [r.timestamp for r in records if r.kind == "glucose"]
    for a, b in zip(glucose_t, glucose_t[1:]):
        if b - a > gap_threshold:
            report.gap_spans.append((a, b))
    report.n_gaps = len(report.gap_spans)
    return records, report


def _interpolate_segments(index: np.ndarray, values: np.ndarray, n: int, max_steps: float):
    """Fill the glucose grid and split it where neighbours are too far apart."""
    glucose = np.full(n, np.nan)
    glucose[index] = values
    segments = []
    start = index[0]
    for prev, nxt in zip(index, index[1:]):
        step = nxt - prev
        if step <= max_steps:
            if step > 1:
                fill = np.arange(1, step)
                glucose[prev + 1 : nxt] = glucose[prev] + (glucose[nxt] - glucose[prev]) * fill / step
        else:
            segments.append((start, prev + 1))
            start = nxt
    segments.append((start, index[-1] + 1))
    return glucose, [(a, b) for a, b in segments if b - a >= 2]


def align(events, dt: float = DEFAULT_DT, max_gap: float = DEFAULT_MAX_GAP) -> AlignedDataset:
    """Put event records on a uniform grid.

    Glucose snaps to the nearest grid index (the latest reading wins a
    collision) and is linearly interpolated across holes whose observed
    neighbours are at most ``max_gap`` seconds apart; longer holes split the
    data into segments. Basal is sampled as a zero-order hold (0 before the
    first record). Bolus and carbs are summed per grid bin.

    The grid is epoch-aligned to multiples of ``dt`` and spans every
    glucose, bolus and carb event, so no dose is ever lost to binning.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    events = sorted(events, key=lambda r: r.timestamp)
    glucose = [r for r in events if r.kind == "glucose"]
    if len(glucose) < 2:
        raise IngestError("at least 2 glucose records are required")

    spanning = [r.timestamp for r in events if r.kind != "basal"]
    first = int(np.floor(min(spanning) / dt + 0.5))
    last = int(np.floor(max(spanning) / dt + 0.5))
    grid = Grid(first * dt, float(dt), last - first + 1)

    by_index: dict[int, float] = {}
    for r in glucose:
        by_index[grid.index_of(r.timestamp)] = r.value
    index = np.array(sorted(by_index), dtype=int)
    values = np.array([by_index[i] for i in index])
    g, segments = _interpolate_segments(index, values, grid.n, max_gap / dt)
    if not segments:
        raise IngestError("no glucose segment has at least 2 samples")

    basal = np.zeros(grid.n)
    times = grid.t0 + np.arange(grid.n) * dt
    basal_events = [r for r in events if r.kind == "basal"]
    if basal_events:
        bt = np.array([r.timestamp for r in basal_events])
        bv = np.array([r.value for r in basal_events])
        # rightmost record at or before each grid time
        pos = np.searchsorted(bt, times, side="right") - 1
        basal = np.where(pos >= 0, bv[np.clip(pos, 0, None)], 0.0)

    bins = {"bolus": np.zeros(grid.n), "carbs": np.zeros(grid.n)}
    for r in events:
        if r.kind in bins:
            bins[r.kind][grid.index_of(r.timestamp)] += r.value

    def series(v, kind):
        return UniformSeries(grid.t0, grid.dt, v, UNITS[kind])

    return AlignedDataset(
        grid,
        {"G": series(g, "glucose")},
        {
            "basal": series(basal, "basal"),
            "bolus": series(bins["bolus"], "bolus"),
            "carbs": series(bins["carbs"], "carbs"),
        },
        tuple(segments),
    )


def events_to_csv(events) -> str:
    """Records in the ingest CSV schema, values rounded to 4 decimals."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REQUIRED_COLUMNS)
    for r in events:
        w.writerow([format_timestamp(r.timestamp), r.kind, f"{r.value:.4f}"])
    return buf.getvalue()


def write_events(path, events) -> None:
    atomic_write_text(path, events_to_csv(events))
