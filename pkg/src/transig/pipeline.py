"""Ingest observed series and run charts over them in monitoring mode.

The preprocessing pipeline is transform, then outlier trimming, then
standardization, in that order.  Trimming statistics are computed once on
the whole transformed series; trimmed points are dropped (not winsorized)
and every dropped index is recorded so a run can be reproduced exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .charts import make_chart

__all__ = [
    "IngestError",
    "MonitorError",
    "SeriesSpec",
    "Provenance",
    "ProcessedSeries",
    "ingest",
    "read_table",
    "sample_acf",
    "MonitorRecord",
    "Episode",
    "MonitorReport",
    "monitor",
    "synthetic_price_series",
]

TRANSFORMS = ("none", "log_return")


class IngestError(ValueError):
    """The input file or preprocessing options cannot produce a series."""


class MonitorError(RuntimeError):
    """A chart failed while monitoring; the message carries the time index."""


@dataclass(frozen=True)
class SeriesSpec:
    """Where a series comes from and how to preprocess it.

    column selects by header name (str) or position (int).  trim_sigma=None
    disables trimming; first_n=None disables standardization, otherwise the
    series is divided by the standard deviation of its first first_n
    retained values.
    """

    path: str
    column: int | str = 0
    transform: str = "none"
    trim_sigma: float | None = 3.0
    first_n: int | None = None

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ValueError(f"transform must be one of {TRANSFORMS}")
        if self.trim_sigma is not None and not self.trim_sigma > 0:
            raise ValueError("trim_sigma must be positive")
        if self.first_n is not None and self.first_n < 2:
            raise ValueError("first_n must be at least 2")


@dataclass(frozen=True)
class Provenance:
    """Everything needed to audit one preprocessing run.

    dropped_indices index into the transformed series (0-based).  scale_sd
    is 1.0 when standardization is off.
    """

    n_raw: int
    transform: str
    trim_sigma: float | None
    trim_mean: float
    trim_sd: float
    dropped_indices: tuple
    first_n: int | None
    scale_sd: float


@dataclass(frozen=True)
class ProcessedSeries:
    values: np.ndarray
    provenance: Provenance


def read_table(path, column=0):
    """One numeric column from a delimiter-separated text file.

    The delimiter (comma or tab) is taken from the first non-empty line; a
    first row with any non-numeric cell is treated as a header.  A string
    column requires a header naming it.
    """
    try:
        with open(path, newline="") as fh:
            raw = [line for line in fh if line.strip()]
    except OSError as e:
        raise IngestError(f"cannot read {path}: {e}") from e
    if not raw:
        raise IngestError(f"{path} holds no data rows")
    delim = "\t" if "\t" in raw[0] else ","
    rows = list(csv.reader(raw, delimiter=delim))

    def numeric_row(cells):
        try:
            [float(c) for c in cells]
            return True
        except ValueError:
            return False

    header = None
    if not numeric_row(rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if isinstance(column, str):
        if header is None or column not in header:
            raise IngestError(f"no header column named {column!r} in {path}")
        idx = header.index(column)
    else:
        idx = int(column)
    values = []
    for r, cells in enumerate(rows, start=2 if header else 1):
        if idx >= len(cells):
            raise IngestError(f"{path} line {r}: no column {idx}")
        cell = cells[idx].strip()
        try:
            values.append(float(cell))
        except ValueError:
            raise IngestError(f"{path} line {r}: non-numeric value {cell!r}") from None
    if not values:
        raise IngestError(f"{path} holds no data rows")
    return np.asarray(values, dtype=float)


def _transform(values, kind):
    if kind == "none":
        return np.array(values, dtype=float)
    if np.any(values <= 0):
        bad = int(np.argmax(values <= 0))
        raise IngestError(f"log_return needs positive values; index {bad} is not")
    return np.diff(np.log(values))


def ingest(spec):
    """Load, transform, trim, and standardize one series."""
    raw = read_table(spec.path, spec.column)
    x = _transform(raw, spec.transform)
    if x.size == 0:
        raise IngestError("series is empty after transform")
    m = float(np.mean(x))
    s = float(np.std(x))
    if spec.trim_sigma is not None:
        keep = np.abs(x - m) <= spec.trim_sigma * s
        dropped = tuple(int(i) for i in np.flatnonzero(~keep))
        x = x[keep]
    else:
        dropped = ()
    scale = 1.0
    if spec.first_n is not None:
        if x.size < spec.first_n:
            raise IngestError(
                f"only {x.size} values retained; standardization needs {spec.first_n}"
            )
        scale = float(np.std(x[: spec.first_n]))
        if scale == 0.0:
            raise IngestError("standardization window has zero standard deviation")
        x = x / scale
    prov = Provenance(
        n_raw=int(raw.size),
        transform=spec.transform,
        trim_sigma=spec.trim_sigma,
        trim_mean=m,
        trim_sd=s,
        dropped_indices=dropped,
        first_n=spec.first_n,
        scale_sd=scale,
    )
    return ProcessedSeries(values=x, provenance=prov)


def sample_acf(values, max_lag=20):
    """Sample autocorrelations r_1..r_max_lag (biased normalization)."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two observations")
    d = x - x.mean()
    denom = float(d @ d)
    if denom == 0.0:
        raise ValueError("series is constant")
    max_lag = min(max_lag, x.size - 1)
    return np.array([float(d[k:] @ d[: x.size - k]) / denom for k in range(1, max_lag + 1)])


@dataclass(frozen=True)
class MonitorRecord:
    t: int
    chart: str
    statistic: float
    alarm: bool
    direction: str | None = None


@dataclass(frozen=True)
class Episode:
    """A maximal run of consecutive alarms from one chart."""

    chart: str
    start: int
    end: int
    extremal: float  # the alarmed statistic of largest magnitude, signed


@dataclass(frozen=True)
class MonitorReport:
    records: tuple
    episodes: tuple

    def long_rows(self):
        """(t, chart, statistic, alarm) rows for the plot-ready file."""
        return [(r.t, r.chart, r.statistic, int(r.alarm)) for r in self.records]


def _episodes_for(label, steps):
    out = []
    start = None
    ext = 0.0
    prev_t = None
    for st in steps:
        if st.alarm:
            if start is None or st.t != prev_t + 1:
                if start is not None:
                    out.append(Episode(chart=label, start=start, end=prev_t, extremal=ext))
                start, ext = st.t, st.statistic
            elif abs(st.statistic) > abs(ext):
                ext = st.statistic
            prev_t = st.t
    if start is not None:
        out.append(Episode(chart=label, start=start, end=prev_t, extremal=ext))
    return out


def monitor(series, configs, two_sided=False):
    """Run charts over an observed series.

    two_sided=True switches every chart to two-sided alarms (only the
    signed charts allow it).  Statistics enter the report once the window
    is full; warm-up steps are omitted.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim != 1:
        raise ValueError("series must be one-dimensional")
    configs = list(configs)
    if not configs:
        raise ValueError("need at least one chart config")
    if series.size <= max(c.w for c in configs):
        raise ValueError("series must be longer than the window width")
    ids = [c.chart_id for c in configs]
    labels = [
        cid if ids.count(cid) == 1 else f"{cid}#{i}" for i, cid in enumerate(ids)
    ]
    records = []
    episodes = []
    for label, cfg in zip(labels, configs):
        if two_sided and not cfg.two_sided:
            cfg = replace(cfg, two_sided=True)
        chart = make_chart(cfg)
        steps = []
        for t, x in enumerate(series, start=1):
            try:
                step = chart.step(float(x))
            except Exception as e:
                raise MonitorError(f"{label} failed at t={t}: {e}") from e
            if not step.warming:
                steps.append(step)
        records.extend(
            MonitorRecord(
                t=s.t,
                chart=label,
                statistic=s.statistic,
                alarm=s.alarm,
                direction=s.direction,
            )
            for s in steps
        )
        episodes.extend(_episodes_for(label, steps))
    return MonitorReport(records=tuple(records), episodes=tuple(episodes))


def synthetic_price_series(seed=0, length=300):
    """A price series with three planted return episodes, for demos/tests.

    Log-returns are N(0, 0.01^2) with a level drop over steps 100-119, a
    variance doubling over 180-199, and both at once over 240-259 (0-based
    indices into the return series).  Returns (prices, spans) where spans
    maps episode kind to its (start, end) range.
    """
    rng = np.random.default_rng(seed)
    sd = 0.01
    r = rng.normal(0.0, sd, size=length)
    spans = {"mean": (100, 120), "variance": (180, 200), "joint": (240, 260)}
    a, b = spans["mean"]
    r[a:b] -= 1.0 * sd
    a, b = spans["variance"]
    r[a:b] = rng.normal(0.0, sd * math.sqrt(2.0), size=b - a)
    a, b = spans["joint"]
    r[a:b] = rng.normal(-1.0 * sd, sd * math.sqrt(2.0), size=b - a)
    prices = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(r)]))
    return prices, spans
