"""
Ingest Module

Parses daily rainfall records, aggregates them to monthly averages and
punches randomized holes into a monthly series for the missing-data
experiment.
"""

import calendar
import datetime as dt
import io
import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, TextIO, Tuple, Union

import numpy as np
import pandas as pd

from .exceptions import IngestError, ParseError
from .series_core import Series

MISSING_TOKEN = 'NA'
DIVISORS = ('calendar', 'present')

_ISO_DATE = re.compile(r'^\d{4}-\d{2}-\d{2}$')


@dataclass(frozen=True)
class DailyRecord:
    """One daily reading; ``value`` is None when the reading is missing."""

    date: dt.date
    value: Optional[float]

    @property
    def observed(self) -> bool:
        return self.value is not None


@dataclass(frozen=True)
class MonthlySeries:
    """Monthly averages (mm/day) anchored at ``start`` = (year, month)."""

    start: Tuple[int, int]
    values: np.ndarray
    mask: np.ndarray
    label: str = ''

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        mask = np.array(self.mask, dtype=bool)
        if values.ndim != 1 or values.shape != mask.shape or values.size < 1:
            raise IngestError("monthly values and mask must have equal length >= 1")
        year, month = self.start
        if not 1 <= month <= 12:
            raise IngestError(f"invalid start month {month}")
        values[~mask] = np.nan
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, 'start', (int(year), int(month)))
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'mask', mask)

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_observed(self) -> int:
        return int(self.mask.sum())

    def months(self) -> List[Tuple[int, int]]:
        """Calendar (year, month) of every position."""
        year, month = self.start
        out = []
        for k in range(len(self)):
            total = (month - 1) + k
            out.append((year + total // 12, total % 12 + 1))
        return out

    def to_series(self) -> Series:
        return Series(self.values, self.mask)

    def with_series(self, series: Series) -> 'MonthlySeries':
        """Same calendar anchor, values taken from ``series``."""
        year, month = self.start
        total = (month - 1) + series.origin_offset
        return MonthlySeries(
            (year + total // 12, total % 12 + 1),
            series.values,
            series.mask,
            self.label,
        )


@dataclass(frozen=True)
class HoleSet:
    """Positions switched to missing by ``puncture``."""

    indices: Tuple[int, ...]
    seed: int

    def __len__(self) -> int:
        return len(self.indices)

    def to_dict(self) -> dict:
        return {'indices': list(self.indices), 'seed': self.seed}


def _read_table(text: Union[str, TextIO], expected: List[str]) -> Tuple[pd.DataFrame, List[int]]:
    """
    Parse CSV text with the given header.

    Blank lines are skipped; the second return value holds the physical
    (1-based) line number of every data row.
    """
    if not isinstance(text, str):
        text = text.read()
    numbered = [(k + 1, line) for k, line in enumerate(text.splitlines()) if line.strip()]
    if not numbered:
        raise ParseError("empty file")
    try:
        frame = pd.read_csv(io.StringIO('\n'.join(line for _, line in numbered)), dtype=str,
                            keep_default_na=False, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ParseError(f"unreadable CSV: {e}") from e
    header = [c.strip() for c in frame.columns]
    if header != expected:
        raise ParseError(f"expected header '{','.join(expected)}', got '{','.join(header)}'",
                         line=numbered[0][0])
    if frame.empty:
        raise ParseError("no data rows")
    frame.columns = expected
    return frame, [k for k, _ in numbered[1:]]


def _read_text(path: Path) -> str:
    try:
        return Path(path).read_text(encoding='utf-8')
    except UnicodeDecodeError as e:
        raise ParseError(f"{path} is not UTF-8 text: {e.reason} at byte {e.start}") from None
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e}") from e


def _parse_value(token: str, line: int) -> Optional[float]:
    token = token.strip()
    if token == MISSING_TOKEN:
        return None
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"invalid value '{token}'", line=line) from None
    if not np.isfinite(value):
        raise ParseError(f"non-finite value '{token}'", line=line)
    if value < 0:
        raise ParseError(f"negative rainfall {value}", line=line)
    return value


def parse_daily_csv(text: Union[str, TextIO]) -> List[DailyRecord]:
    """
    Parse a ``date,value`` daily rainfall file.

    Args:
        text: CSV text or an open text stream. Dates are ISO ``YYYY-MM-DD``;
            ``NA`` marks a missing reading.

    Returns:
        Records in file order.

    Raises:
        ParseError: On an empty file, bad header, malformed date or
            negative value (the message names the line).
    """
    frame, lines = _read_table(text, ['date', 'value'])
    records = []
    for line, date_text, value_text in zip(lines, frame['date'], frame['value']):
        date_text = date_text.strip()
        if not _ISO_DATE.match(date_text):
            raise ParseError(f"malformed date '{date_text}'", line=line)
        try:
            date = dt.date.fromisoformat(date_text)
        except ValueError:
            raise ParseError(f"invalid date '{date_text}'", line=line) from None
        records.append(DailyRecord(date, _parse_value(value_text, line)))
    return records


def read_daily_csv(path: Path) -> List[DailyRecord]:
    """Read and parse a daily file from disk."""
    return parse_daily_csv(_read_text(path))


def aggregate_monthly(
    records: List[DailyRecord],
    label: str = '',
    divisor: str = 'calendar',
) -> MonthlySeries:
    """
    Average daily records per calendar month.

    Each month's value is the sum of its present daily values divided by the
    number of calendar days in the month (``divisor='calendar'``) or by the
    number of present readings (``divisor='present'``). Months with no present
    reading are marked missing.

    Raises:
        IngestError: If records are empty, unsorted or contain duplicate dates.
    """
    if divisor not in DIVISORS:
        raise IngestError(f"divisor must be one of {DIVISORS}, got '{divisor}'")
    if not records:
        raise IngestError("no daily records to aggregate")
    for previous, current in zip(records, records[1:]):
        if current.date == previous.date:
            raise IngestError(f"duplicate date {current.date.isoformat()}")
        if current.date < previous.date:
            raise IngestError(f"dates not sorted at {current.date.isoformat()}")

    frame = pd.DataFrame({
        'period': pd.to_datetime([r.date for r in records]).to_period('M'),
        'value': [np.nan if r.value is None else r.value for r in records],
    })
    months = pd.period_range(frame['period'].iloc[0], frame['period'].iloc[-1], freq='M')
    present = frame.dropna(subset=['value']).groupby('period')['value']
    sums = present.sum().reindex(months, fill_value=0.0)
    counts = present.count().reindex(months, fill_value=0)

    values = np.full(len(months), np.nan)
    mask = np.zeros(len(months), dtype=bool)
    for k, period in enumerate(months):
        if counts.iloc[k] == 0:
            continue
        days = calendar.monthrange(period.year, period.month)[1]
        denominator = days if divisor == 'calendar' else int(counts.iloc[k])
        values[k] = float(sums.iloc[k]) / denominator
        mask[k] = True
    return MonthlySeries((months[0].year, months[0].month), values, mask, label)


def puncture(series: MonthlySeries, count: int, seed: int) -> Tuple[MonthlySeries, HoleSet]:
    """
    Switch ``count`` randomly chosen observed months to missing.

    Sampling is without replacement by a partial Fisher-Yates shuffle driven
    by a seeded PCG64 generator, so a fixed seed always gives the same holes.

    Raises:
        IngestError: If ``count`` is negative or not below the observed count.
    """
    if count < 0:
        raise IngestError(f"hole count must be non-negative, got {count}")
    observed = np.flatnonzero(series.mask)
    if count >= observed.size:
        raise IngestError(
            f"cannot remove {count} of {observed.size} observed months"
        )
    rng = np.random.default_rng(seed)
    pool = observed.copy()
    for k in range(count):
        j = int(rng.integers(k, pool.size))
        pool[k], pool[j] = pool[j], pool[k]
    chosen = np.sort(pool[:count])

    mask = series.mask.copy()
    mask[chosen] = False
    punctured = MonthlySeries(series.start, series.values, mask, series.label)
    return punctured, HoleSet(tuple(int(i) for i in chosen), int(seed))


def monthly_to_csv(series: MonthlySeries) -> str:
    """Render ``year,month,value,observed``; values round-trip exactly."""
    months = series.months()
    frame = pd.DataFrame({
        'year': [y for y, _ in months],
        'month': [m for _, m in months],
        'value': [repr(float(v)) if ok else MISSING_TOKEN for v, ok in zip(series.values, series.mask)],
        'observed': series.mask.astype(int),
    })
    return frame.to_csv(index=False, lineterminator='\n')


def parse_monthly_csv(text: Union[str, TextIO], label: str = '') -> MonthlySeries:
    """
    Parse a file written by ``monthly_to_csv``.

    Raises:
        ParseError: On malformed rows or non-consecutive months.
    """
    frame, lines = _read_table(text, ['year', 'month', 'value', 'observed'])
    values, mask = [], []
    start = None
    expected = None
    for line, (year, month, value, observed) in zip(lines, frame.itertuples(index=False)):
        try:
            year, month = int(year), int(month)
        except ValueError:
            raise ParseError(f"invalid year/month '{year},{month}'", line=line) from None
        if not 1 <= month <= 12:
            raise ParseError(f"invalid month {month}", line=line)
        if expected is not None and (year, month) != expected:
            raise ParseError(f"expected {expected[0]}-{expected[1]:02d}, got {year}-{month:02d}", line=line)
        if start is None:
            start = (year, month)
        expected = (year + month // 12, month % 12 + 1)
        if observed.strip() not in ('0', '1'):
            raise ParseError(f"observed flag must be 0/1, got '{observed}'", line=line)
        parsed = _parse_value(value, line)
        is_observed = observed.strip() == '1'
        if is_observed and parsed is None:
            raise ParseError("observed row carries NA", line=line)
        values.append(parsed if is_observed else np.nan)
        mask.append(is_observed)
    return MonthlySeries(start, np.array(values, dtype=float), np.array(mask), label)


def read_series_file(path: Path, label: Optional[str] = None, divisor: str = 'calendar') -> MonthlySeries:
    """
    Load a daily (``date,value``) or monthly (``year,month,value,observed``)
    file, detected from its header.
    """
    path = Path(path)
    text = _read_text(path)
    label = path.stem if label is None else label
    header = text.lstrip().split('\n', 1)[0].replace(' ', '').strip()
    if header.startswith('year,month'):
        return parse_monthly_csv(text, label=label)
    return aggregate_monthly(parse_daily_csv(text), label=label, divisor=divisor)


def daily_from_monthly(series: MonthlySeries) -> List[DailyRecord]:
    """
    Spread each monthly average over its calendar days; missing months give
    NA readings. Aggregating the result with the calendar divisor returns the
    monthly values up to rounding.
    """
    records = []
    for (year, month), value, observed in zip(series.months(), series.values, series.mask):
        days = calendar.monthrange(year, month)[1]
        for day in range(1, days + 1):
            records.append(DailyRecord(dt.date(year, month, day), float(value) if observed else None))
    return records


def daily_to_csv(records: List[DailyRecord]) -> str:
    """Render ``date,value`` rows readable by ``parse_daily_csv``."""
    frame = pd.DataFrame({
        'date': [r.date.isoformat() for r in records],
        'value': [repr(r.value) if r.observed else MISSING_TOKEN for r in records],
    })
    return frame.to_csv(index=False, lineterminator='\n')
