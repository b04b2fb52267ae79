"""OHLC ingestion, calendar arithmetic and report persistence.

Input files are plain CSV with the exact header ``date,open,high,low,close``,
ISO-8601 dates and strictly ascending rows.  Validation is collected per row
so a single bad line does not mask the rest of the file.

Reports (scaling fits, proxy comparisons, forecast tables, run manifests) are
persisted as versioned JSON; floats are written with ``repr`` precision so a
save/load round trip is lossless.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import enum
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

log = logging.getLogger("roughvol")

OHLC_HEADER = ["date", "open", "high", "low", "close"]
VOL_HEADER = ["date", "sigma"]


class DataError(ValueError):
    """A file or series violates the data contract.

    ``errors`` holds one message per offending row so callers can report
    everything at once.
    """

    def __init__(self, message: str, errors: Sequence[str] = ()):
        super().__init__(message)
        self.errors = list(errors)

    def __str__(self) -> str:
        base = super().__str__()
        if self.errors:
            return base + "\n  " + "\n  ".join(self.errors)
        return base


class SchemaError(DataError):
    """A report file does not match the expected schema."""


class VolProxy(str, enum.Enum):
    """Named daily-volatility estimators; the value is the wire name."""

    CLOSE_TO_CLOSE = "CloseToClose"
    PARKINSON = "Parkinson"
    GARMAN_KLASS_PRACTICAL = "GarmanKlassPractical"
    GARMAN_KLASS_FULL = "GarmanKlassFull"
    ROGERS_SATCHELL = "RogersSatchell"
    REALIZED_VOLATILITY = "RealizedVolatility"
    SIMULATED_TRUTH = "SimulatedTruth"


@dataclass(frozen=True)
class OhlcBar:
    """One trading day of open/high/low/close prices."""

    date: dt.date
    open: float
    high: float
    low: float
    close: float

    def validate(self) -> list[str]:
        """Return human-readable invariant violations (empty if valid)."""
        problems = []
        for name in ("open", "high", "low", "close"):
            if not (getattr(self, name) > 0.0) or not math.isfinite(getattr(self, name)):
                problems.append(f"{name} must be a positive finite price, got {getattr(self, name)!r}")
        if not problems:
            if self.low > min(self.open, self.close):
                problems.append(f"low {self.low} above min(open, close)")
            if self.high < max(self.open, self.close):
                problems.append(f"high {self.high} below max(open, close)")
            if self.low > self.high:
                problems.append(f"low {self.low} above high {self.high}")
        return problems


def _as_date_array(dates: Iterable[dt.date | str | np.datetime64]) -> np.ndarray:
    out = np.array([np.datetime64(d if not isinstance(d, dt.date) else d.isoformat(), "D") for d in dates], dtype="datetime64[D]")
    return out


class OhlcSeries:
    """A ticker's dated OHLC bars, dates strictly increasing."""

    def __init__(self, ticker: str, dates, open, high, low, close):
        self.ticker = str(ticker)
        self.dates = _as_date_array(dates)
        self.open = np.asarray(open, dtype=float)
        self.high = np.asarray(high, dtype=float)
        self.low = np.asarray(low, dtype=float)
        self.close = np.asarray(close, dtype=float)
        n = len(self.dates)
        if not (len(self.open) == len(self.high) == len(self.low) == len(self.close) == n):
            raise DataError("OHLC arrays must share one length")
        if n and not np.all(np.diff(self.dates).astype(int) > 0):
            bad = self.dates[1:][np.diff(self.dates).astype(int) <= 0]
            raise DataError("dates must be strictly increasing", [f"date out of order or duplicated: {d}" for d in bad])

    @classmethod
    def from_bars(cls, ticker: str, bars: Sequence[OhlcBar]) -> "OhlcSeries":
        errors = []
        for i, bar in enumerate(bars):
            errors += [f"bar {i} ({bar.date}): {msg}" for msg in bar.validate()]
        if errors:
            raise DataError("invalid bars", errors)
        return cls(
            ticker,
            [b.date for b in bars],
            [b.open for b in bars],
            [b.high for b in bars],
            [b.low for b in bars],
            [b.close for b in bars],
        )

    def __len__(self) -> int:
        return len(self.dates)

    def __iter__(self) -> Iterator[OhlcBar]:
        for i in range(len(self)):
            yield self.bar(i)

    def bar(self, i: int) -> OhlcBar:
        return OhlcBar(
            self.dates[i].astype(dt.date),
            float(self.open[i]),
            float(self.high[i]),
            float(self.low[i]),
            float(self.close[i]),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OhlcSeries):
            return NotImplemented
        return (
            self.ticker == other.ticker
            and np.array_equal(self.dates, other.dates)
            and all(np.array_equal(getattr(self, f), getattr(other, f)) for f in ("open", "high", "low", "close"))
        )


class VolSeries:
    """Dated daily volatilities (per sqrt(day)) from one named proxy."""

    def __init__(self, ticker: str, proxy: VolProxy | str, dates, values):
        self.ticker = str(ticker)
        self.proxy = VolProxy(proxy)
        self.dates = _as_date_array(dates)
        self.values = np.asarray(values, dtype=float)
        if len(self.values) != len(self.dates):
            raise DataError("dates and values must share one length")
        if len(self.dates) > 1 and not np.all(np.diff(self.dates).astype(int) > 0):
            raise DataError("dates must be strictly increasing")
        if np.any(~np.isfinite(self.values)) or np.any(self.values <= 0.0):
            raise DataError("volatilities must be positive and finite")

    def __len__(self) -> int:
        return len(self.dates)

    def day_offsets(self) -> np.ndarray:
        """Calendar-day offsets from the first observation."""
        if len(self) == 0:
            return np.zeros(0, dtype=np.int64)
        return (self.dates - self.dates[0]).astype(np.int64)

    def log_values(self) -> np.ndarray:
        return np.log(self.values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VolSeries):
            return NotImplemented
        return (
            self.ticker == other.ticker
            and self.proxy == other.proxy
            and np.array_equal(self.dates, other.dates)
            and np.array_equal(self.values, other.values)
        )


def calendar_lag(date_a: dt.date | np.datetime64, date_b: dt.date | np.datetime64) -> int:
    """Calendar days from ``date_a`` to the later ``date_b``.

    A Friday-to-Monday gap counts as 3 days; no business-day renumbering.
    """
    a = np.datetime64(date_a if not isinstance(date_a, dt.date) else date_a.isoformat(), "D")
    b = np.datetime64(date_b if not isinstance(date_b, dt.date) else date_b.isoformat(), "D")
    lag = int((b - a).astype(int))
    if lag <= 0:
        raise ValueError(f"date_a must precede date_b, got {a} >= {b}")
    return lag


# ---------------------------------------------------------------------------
# CSV ingestion / emission
# ---------------------------------------------------------------------------

def load_ohlc(path: str | os.PathLike, ticker: str | None = None) -> OhlcSeries:
    """Read and validate an OHLC CSV.

    Every malformed row is collected (with its 1-based line number) and
    reported in a single DataError.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    errors: list[str] = []
    bars: list[OhlcBar] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != OHLC_HEADER:
            raise DataError(f"{path}: expected header {','.join(OHLC_HEADER)!r}, got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 5:
                errors.append(f"row {lineno}: expected 5 fields, got {len(row)}")
                continue
            try:
                date = dt.date.fromisoformat(row[0].strip())
                o, h, l, c = (float(x) for x in row[1:])
            except ValueError as exc:
                errors.append(f"row {lineno}: {exc}")
                continue
            bar = OhlcBar(date, o, h, l, c)
            bad = bar.validate()
            if bad:
                errors.extend(f"row {lineno}: {msg}" for msg in bad)
                continue
            bars.append(bar)
    dates = [b.date for b in bars]
    for i in range(1, len(dates)):
        if dates[i] <= dates[i - 1]:
            errors.append(f"date {dates[i]} not after {dates[i - 1]} (duplicate or out of order)")
    if errors:
        raise DataError(f"{path}: {len(errors)} invalid row(s)", errors)
    return OhlcSeries.from_bars(ticker or path.stem, bars)


def save_ohlc(series: OhlcSeries, path: str | os.PathLike) -> None:
    """Write an OHLC CSV in the canonical ingestion format."""
    rows = ["date,open,high,low,close"]
    for i in range(len(series)):
        rows.append(
            f"{series.dates[i]},{float(series.open[i])!r},{float(series.high[i])!r},"
            f"{float(series.low[i])!r},{float(series.close[i])!r}"
        )
    _atomic_write_text(Path(path), "\n".join(rows) + "\n")


def load_vol_csv(path: str | os.PathLike, ticker: str | None = None, proxy: VolProxy | str | None = None) -> VolSeries:
    """Read a volatility CSV (``date,sigma``, optional ``# key: value`` header)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    meta: dict[str, str] = {}
    dates: list[str] = []
    values: list[float] = []
    errors: list[str] = []
    with path.open(encoding="utf-8") as fh:
        lineno = 0
        header_seen = False
        for line in fh:
            lineno += 1
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line.lstrip("#").partition(":")
                meta[key.strip()] = value.strip()
                continue
            if not header_seen:
                if [c.strip() for c in line.split(",")] != VOL_HEADER:
                    raise DataError(f"{path}: expected header {','.join(VOL_HEADER)!r}, got {line!r}")
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 2:
                errors.append(f"row {lineno}: expected 2 fields")
                continue
            try:
                dt.date.fromisoformat(parts[0])
                sigma = float(parts[1])
            except ValueError as exc:
                errors.append(f"row {lineno}: {exc}")
                continue
            if not sigma > 0:
                errors.append(f"row {lineno}: sigma must be positive, got {sigma!r}")
                continue
            dates.append(parts[0])
            values.append(sigma)
    if errors:
        raise DataError(f"{path}: {len(errors)} invalid row(s)", errors)
    return VolSeries(
        ticker or meta.get("ticker", path.stem),
        proxy or meta.get("proxy", VolProxy.REALIZED_VOLATILITY),
        dates,
        values,
    )


def save_vol_csv(series: VolSeries, path: str | os.PathLike) -> None:
    rows = [f"# ticker: {series.ticker}", f"# proxy: {series.proxy.value}", "date,sigma"]
    rows += [f"{series.dates[i]},{float(series.values[i])!r}" for i in range(len(series))]
    _atomic_write_text(Path(path), "\n".join(rows) + "\n")


# ---------------------------------------------------------------------------
# Report persistence
# ---------------------------------------------------------------------------

_REPORT_REGISTRY: dict[str, type] = {}


def register_report(schema: str):
    """Class decorator: make a dataclass persistable under ``schema``."""

    def wrap(cls):
        cls.SCHEMA = schema
        _REPORT_REGISTRY[schema] = cls
        return cls

    return wrap


def _encode(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        if np.issubdtype(value.dtype, np.datetime64):
            return [str(d) for d in value]
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, VolProxy):
        return value.value
    if isinstance(value, dt.date):
        return value.isoformat()
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: _encode(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, dict):
        return {k: _encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    return value


def save_report(report: Any, path: str | os.PathLike) -> None:
    """Persist a registered report dataclass as schema-stamped JSON."""
    schema = getattr(report, "SCHEMA", None)
    if schema is None or dataclasses.is_dataclass(report) is False:
        raise SchemaError(f"object of type {type(report).__name__} is not a registered report")
    payload = {"schema": schema}
    payload.update(_encode(report))
    _atomic_write_text(Path(path), json.dumps(payload, indent=1, allow_nan=True) + "\n")


def load_report(path: str | os.PathLike, expected: type | None = None) -> Any:
    """Load a report written by save_report, dispatching on its schema field."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not a report file ({exc})") from exc
    schema = payload.pop("schema", None)
    cls = _REPORT_REGISTRY.get(schema)
    if cls is None:
        raise SchemaError(f"{path}: unknown report schema {schema!r}")
    if expected is not None and cls is not expected:
        raise SchemaError(f"{path}: expected {expected.__name__}, found {cls.__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    if set(payload) != names:
        missing = sorted(names - set(payload))
        extra = sorted(set(payload) - names)
        raise SchemaError(f"{path}: field mismatch for {schema} (missing {missing}, extra {extra})")
    return cls.from_payload(payload) if hasattr(cls, "from_payload") else cls(**payload)


def _atomic_write_text(path: Path, text: str) -> None:
    """Write-temp-then-rename so readers never observe partial files."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
