"""Trade ingestion, delivery-product calendars, sample assembly, and splits.

All timestamps are UTC internally. The canonical trade CSV schema is
``product_start,side,exec_time,price,volume`` with side "+" (buy) or "-"
(sell). Products are identified purely by their UTC delivery start; no
DST special-casing.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import features as feat
from .target import LEAD_TIME, compute_id3
from .util import UTC, format_timestamp, from_micros, parse_timestamp, to_micros

log = logging.getLogger(__name__)

BUY = "+"
SELL = "-"
SIDES = (BUY, SELL)

TRADE_CSV_HEADER = ["product_start", "side", "exec_time", "price", "volume"]

MARKET_GATE_CLOSURE = {
    "DE": dt.timedelta(minutes=30),
    "AT": dt.timedelta(minutes=0),
}
PRODUCT_DURATIONS = {
    "60min": dt.timedelta(minutes=60),
    "15min": dt.timedelta(minutes=15),
}


class TradeParseError(ValueError):
    """Malformed trade CSV content (carries the 1-based line number)."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Trade:
    product_start: dt.datetime
    side: str
    exec_time: dt.datetime
    price: float
    volume: float
    seq: int

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"side must be '+' or '-', got {self.side!r}")
        if not self.volume > 0:
            raise ValueError("volume must be positive")
        if self.exec_time >= self.product_start:
            raise ValueError("exec_time must precede product_start")


@dataclass(frozen=True)
class RejectedRow:
    line: int
    reason: str


@dataclass(frozen=True)
class ProductSpec:
    market: str = "DE"
    product_type: str = "60min"
    delta_m: Optional[dt.timedelta] = None
    lead_time: dt.timedelta = LEAD_TIME

    def __post_init__(self):
        if self.product_type not in PRODUCT_DURATIONS:
            raise ValueError(f"unknown product_type {self.product_type!r}")
        if self.delta_m is None:
            if self.market not in MARKET_GATE_CLOSURE:
                raise ValueError(
                    f"market {self.market!r} has no built-in gate closure; pass delta_m")
            object.__setattr__(self, "delta_m", MARKET_GATE_CLOSURE[self.market])
        if self.delta_m < dt.timedelta(0):
            raise ValueError("delta_m must be non-negative")
        if not self.lead_time > self.delta_m:
            raise ValueError("lead_time must exceed delta_m")

    @property
    def duration(self) -> dt.timedelta:
        return PRODUCT_DURATIONS[self.product_type]


@dataclass(frozen=True)
class Sample:
    delivery_time: dt.datetime
    forecast_time: dt.datetime
    features: Optional[np.ndarray]
    target_id3: Optional[float]
    matched_trade_count: int


@dataclass(frozen=True)
class BuildReport:
    n_products: int
    n_built: int
    n_discarded_features: int
    n_discarded_with_target: int
    n_missing_target: int


@dataclass(frozen=True)
class SplitBoundaries:
    """Left-closed, right-open intervals split by the three end timestamps:
    train = (-inf, train_end), val = [train_end, val_end), test = [val_end, test_end)."""
    train_end: dt.datetime
    val_end: dt.datetime
    test_end: dt.datetime

    def __post_init__(self):
        if not self.train_end < self.val_end < self.test_end:
            raise ValueError("boundaries must be strictly increasing")


@dataclass
class DatasetSplit:
    train: List[Sample] = field(default_factory=list)
    val: List[Sample] = field(default_factory=list)
    test: List[Sample] = field(default_factory=list)
    boundaries: Optional[SplitBoundaries] = None


def parse_trades(source, tz: dt.tzinfo = UTC) -> Tuple[List[Trade], List[RejectedRow]]:
    """Parse the canonical trade CSV.

    Returns trades sorted by (exec_time, seq) with seq assigned in input
    order, plus the rejected rows (non-positive volume, exec_time at or
    after delivery). Structurally malformed rows raise TradeParseError.
    """
    if isinstance(source, bytes):
        source = io.StringIO(source.decode("utf-8"))
    elif isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise TradeParseError(1, "empty input, expected header") from None
    if [h.strip() for h in header] != TRADE_CSV_HEADER:
        raise TradeParseError(1, f"bad header {header!r}, expected {TRADE_CSV_HEADER}")

    trades: List[Trade] = []
    rejected: List[RejectedRow] = []
    seq = 0
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 5:
            raise TradeParseError(lineno, f"expected 5 fields, got {len(row)}")
        raw_start, raw_side, raw_exec, raw_price, raw_volume = row
        try:
            product_start = parse_timestamp(raw_start, tz)
            exec_time = parse_timestamp(raw_exec, tz)
            price = float(raw_price)
            volume = float(raw_volume)
        except (ValueError, OverflowError) as exc:
            raise TradeParseError(lineno, str(exc)) from None
        side = raw_side.strip()
        if side not in SIDES:
            raise TradeParseError(lineno, f"side must be '+' or '-', got {raw_side!r}")
        if not np.isfinite(price) or not np.isfinite(volume):
            raise TradeParseError(lineno, "non-finite price or volume")
        if volume <= 0:
            rejected.append(RejectedRow(lineno, f"volume {volume} <= 0"))
            continue
        if exec_time >= product_start:
            rejected.append(RejectedRow(lineno, "exec_time at or after product_start"))
            continue
        trades.append(Trade(product_start, side, exec_time, price, volume, seq))
        seq += 1
    trades.sort(key=lambda t: (to_micros(t.exec_time), t.seq))
    return trades, rejected


def write_trades_csv(trades: Iterable[Trade], fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(TRADE_CSV_HEADER)
    for t in sorted(trades, key=lambda t: (to_micros(t.exec_time), t.seq)):
        writer.writerow([
            format_timestamp(t.product_start),
            t.side,
            format_timestamp(t.exec_time),
            repr(t.price),
            repr(t.volume),
        ])


def enumerate_products(spec: ProductSpec, start: dt.datetime,
                       end: dt.datetime) -> List[dt.datetime]:
    """Delivery times inside [start, end) at the product cadence, aligned to
    period boundaries on the UTC grid."""
    if not start < end:
        raise ValueError("empty horizon")
    step_us = spec.duration // dt.timedelta(microseconds=1)
    start_us = to_micros(start)
    end_us = to_micros(end)
    first = -(-start_us // step_us) * step_us
    return [from_micros(us) for us in range(first, end_us, step_us)]


def build_samples(trades: Sequence[Trade], spec: ProductSpec, start: dt.datetime,
                  end: dt.datetime) -> Tuple[List[Sample], BuildReport]:
    """Assemble one sample per delivery product in the horizon.

    Feature extraction uses trades up to t_f = t_d - lead_time; the target
    comes from the window [t_f, t_d - delta_m]. Products where either side
    has no history at all are dropped (counted in the report); products
    with an empty target window keep features but carry no target.
    """
    by_product: Dict[int, List[Trade]] = {}
    for t in trades:
        by_product.setdefault(to_micros(t.product_start), []).append(t)

    samples: List[Sample] = []
    n_discarded = 0
    n_discarded_with_target = 0
    n_missing_target = 0
    deliveries = enumerate_products(spec, start, end)
    for t_d in deliveries:
        t_f = t_d - spec.lead_time
        prod_trades = by_product.get(to_micros(t_d), [])
        id3 = compute_id3(prod_trades, t_d, spec.delta_m)
        vec = feat.extract_features(prod_trades, t_f)
        if vec is None:
            n_discarded += 1
            if id3.value is not None:
                n_discarded_with_target += 1
            continue
        if id3.value is None:
            n_missing_target += 1
        samples.append(Sample(
            delivery_time=t_d,
            forecast_time=t_f,
            features=vec,
            target_id3=id3.value,
            matched_trade_count=id3.trades_used,
        ))
    report = BuildReport(
        n_products=len(deliveries),
        n_built=len(samples),
        n_discarded_features=n_discarded,
        n_discarded_with_target=n_discarded_with_target,
        n_missing_target=n_missing_target,
    )
    return samples, report


def split_dataset(samples: Sequence[Sample],
                  boundaries: SplitBoundaries) -> DatasetSplit:
    """Assign samples to train/val/test by delivery time.

    Intervals are left-closed, right-open; a sample exactly on a boundary
    goes to the later split. Samples at or beyond test_end are dropped
    with a warning.
    """
    split = DatasetSplit(boundaries=boundaries)
    n_beyond = 0
    for s in sorted(samples, key=lambda s: to_micros(s.delivery_time)):
        if s.delivery_time < boundaries.train_end:
            split.train.append(s)
        elif s.delivery_time < boundaries.val_end:
            split.val.append(s)
        elif s.delivery_time < boundaries.test_end:
            split.test.append(s)
        else:
            n_beyond += 1
    for name, part in (("train", split.train), ("val", split.val), ("test", split.test)):
        if not part:
            log.warning("split %r is empty", name)
    if n_beyond:
        log.warning("%d samples at or beyond test_end were dropped", n_beyond)
    log.info("split sizes: train=%d val=%d test=%d",
             len(split.train), len(split.val), len(split.test))
    return split


def supervised(samples: Iterable[Sample]) -> List[Sample]:
    """Samples usable for supervised fitting (target present)."""
    return [s for s in samples if s.target_id3 is not None]


SAMPLE_CSV_FIXED = ["t_d", "t_f", "target_id3", "matched_trade_count"]


def write_samples_csv(samples: Sequence[Sample], fh, extra: Optional[dict] = None) -> None:
    """One row per sample: fixed columns then the 384 canonical feature columns.

    ``extra`` appends constant metadata columns (e.g. config hash).
    """
    extra = extra or {}
    writer = csv.writer(fh)
    writer.writerow(SAMPLE_CSV_FIXED + list(feat.FEATURE_NAMES) + list(extra))
    for s in samples:
        if s.features is None:
            raise ValueError("cannot serialize a sample without features")
        row = [
            format_timestamp(s.delivery_time),
            format_timestamp(s.forecast_time),
            "" if s.target_id3 is None else repr(s.target_id3),
            str(s.matched_trade_count),
        ]
        row.extend(repr(float(v)) for v in s.features)
        row.extend(str(v) for v in extra.values())
        writer.writerow(row)


def read_samples_csv(fh) -> List[Sample]:
    reader = csv.reader(fh)
    header = next(reader)
    expected = SAMPLE_CSV_FIXED + list(feat.FEATURE_NAMES)
    if header[: len(expected)] != expected:
        raise ValueError("sample CSV header does not match the canonical layout")
    out: List[Sample] = []
    for row in reader:
        t_d = parse_timestamp(row[0])
        t_f = parse_timestamp(row[1])
        target = float(row[2]) if row[2] else None
        count = int(row[3])
        vec = np.array([float(v) for v in row[4: 4 + len(feat.FEATURE_NAMES)]])
        out.append(Sample(t_d, t_f, vec, target, count))
    return out
