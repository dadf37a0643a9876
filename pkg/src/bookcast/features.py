"""Per-sample orderbook feature extraction.

For each sample, 32 trade statistics are computed per market side over six
look-back windows ending at the forecast time t_f, giving a 384-value
vector (32 x 2 sides x 6 windows). Windows are left-open, right-closed
(t_f - w, t_f]; the unbounded window covers all history up to t_f. An
empty window borrows the statistics of the smallest strictly longer
non-empty window; a sample whose unbounded window is empty on either side
is discarded.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .util import to_micros

WINDOW_MINUTES: Tuple[float, ...] = (1, 5, 15, 60, 180, math.inf)
WINDOW_LABELS: Tuple[str, ...] = ("1", "5", "15", "60", "180", "inf")
PERCENTILES: Tuple[int, ...] = (10, 25, 45, 50, 55, 75, 90)
SIDE_LABELS: Tuple[str, ...] = ("buy", "sell")

# (family slug, expands over percentile levels) in fixed table order
FAMILIES: Tuple[Tuple[str, bool], ...] = (
    ("price_pctl", True),
    ("min_price", False),
    ("max_price", False),
    ("first_price", False),
    ("last_price", False),
    ("mean_price", False),
    ("price_vol", False),
    ("delta_price", False),
    ("volume_pctl", True),
    ("min_volume", False),
    ("max_volume", False),
    ("first_volume", False),
    ("last_volume", False),
    ("mean_volume", False),
    ("volume_vol", False),
    ("delta_volume", False),
    ("sum_volume", False),
    ("trade_count", False),
    ("vwap", False),
    ("momentum", False),
)
FAMILY_SLUGS = tuple(f for f, _ in FAMILIES)
_PERCENTILE_FAMILIES = {f for f, p in FAMILIES if p}

VWAP_EPS = 1e-9  # momentum denominator guard; prices cross zero

_SIDE_ALIASES = {"buy": "buy", "sell": "sell", "+": "buy", "-": "sell"}


def _window_label(window) -> str:
    if window is None or window == math.inf or window == "inf":
        return "inf"
    m = float(window)
    if m not in WINDOW_MINUTES:
        raise ValueError(f"window must be one of {WINDOW_MINUTES}, got {window}")
    return str(int(m))


def feature_name(family: str, side: str, window, percentile: Optional[int] = None) -> str:
    """Canonical feature name, e.g. ``price_pctl|buy|15|45`` or ``vwap|sell|inf``."""
    if family not in FAMILY_SLUGS:
        raise ValueError(f"unknown feature family {family!r}")
    if side not in _SIDE_ALIASES:
        raise ValueError(f"unknown side {side!r}")
    label = _window_label(window)
    if family in _PERCENTILE_FAMILIES:
        if percentile is None:
            raise ValueError(f"{family} requires a percentile level")
        if percentile not in PERCENTILES:
            raise ValueError(f"percentile must be one of {PERCENTILES}, got {percentile}")
        return f"{family}|{_SIDE_ALIASES[side]}|{label}|{percentile}"
    if percentile is not None:
        raise ValueError(f"{family} does not take a percentile level")
    return f"{family}|{_SIDE_ALIASES[side]}|{label}"


def parse_feature_name(name: str) -> Tuple[str, str, str, Optional[int]]:
    """Inverse of feature_name: (family, side, window label, percentile)."""
    parts = name.split("|")
    if len(parts) == 3:
        family, side, label = parts
        pct = None
    elif len(parts) == 4:
        family, side, label, raw = parts
        pct = int(raw)
    else:
        raise ValueError(f"malformed feature name {name!r}")
    if family not in FAMILY_SLUGS or side not in SIDE_LABELS or label not in WINDOW_LABELS:
        raise ValueError(f"malformed feature name {name!r}")
    return family, side, label, pct


def _enumerate_names() -> List[str]:
    names = []
    for family, is_pctl in FAMILIES:
        for side in SIDE_LABELS:
            for label in WINDOW_LABELS:
                if is_pctl:
                    for p in PERCENTILES:
                        names.append(f"{family}|{side}|{label}|{p}")
                else:
                    names.append(f"{family}|{side}|{label}")
    return names


FEATURE_NAMES: Tuple[str, ...] = tuple(_enumerate_names())
N_FEATURES = len(FEATURE_NAMES)

# per-(side, window) layout: the 32 statistics in family order
_SUBVEC: List[Tuple[str, Optional[int]]] = []
for _family, _is_pctl in FAMILIES:
    if _is_pctl:
        _SUBVEC.extend((_family, _p) for _p in PERCENTILES)
    else:
        _SUBVEC.append((_family, None))
N_STATS = len(_SUBVEC)

_NAME_POS = {n: i for i, n in enumerate(FEATURE_NAMES)}
_SCATTER: Dict[Tuple[str, str], np.ndarray] = {}
for _side in SIDE_LABELS:
    for _label in WINDOW_LABELS:
        idx = []
        for _family, _p in _SUBVEC:
            suffix = f"|{_p}" if _p is not None else ""
            idx.append(_NAME_POS[f"{_family}|{_side}|{_label}{suffix}"])
        _SCATTER[(_side, _label)] = np.array(idx, dtype=np.intp)


@dataclass(frozen=True)
class SideWindowStats:
    price_pctl: Tuple[float, ...]
    min_price: float
    max_price: float
    first_price: float
    last_price: float
    mean_price: float
    price_vol: float
    delta_price: float
    volume_pctl: Tuple[float, ...]
    min_volume: float
    max_volume: float
    first_volume: float
    last_volume: float
    mean_volume: float
    volume_vol: float
    delta_volume: float
    sum_volume: float
    trade_count: int
    vwap: float
    momentum: float

    def as_array(self) -> np.ndarray:
        return np.concatenate([
            np.asarray(self.price_pctl, dtype=float),
            [self.min_price, self.max_price, self.first_price, self.last_price,
             self.mean_price, self.price_vol, self.delta_price],
            np.asarray(self.volume_pctl, dtype=float),
            [self.min_volume, self.max_volume, self.first_volume, self.last_volume,
             self.mean_volume, self.volume_vol, self.delta_volume,
             self.sum_volume, float(self.trade_count), self.vwap, self.momentum],
        ])


def _stats_from_arrays(prices: np.ndarray, volumes: np.ndarray) -> SideWindowStats:
    n = prices.size
    levels = np.array(PERCENTILES, dtype=float) / 100.0
    # centered weighted mean: exact for constant prices, well conditioned
    # for price levels far from zero
    p0 = float(prices[0])
    vwap = p0 + float(np.dot(prices - p0, volumes) / np.sum(volumes))
    last_p = float(prices[-1])
    momentum = 0.0 if abs(vwap) < VWAP_EPS else (last_p - vwap) / vwap
    return SideWindowStats(
        price_pctl=tuple(float(v) for v in np.quantile(prices, levels)),
        min_price=float(prices.min()),
        max_price=float(prices.max()),
        first_price=float(prices[0]),
        last_price=last_p,
        mean_price=float(prices.mean()),
        price_vol=float(np.std(prices)),
        delta_price=float(prices[-1] - prices[0]),
        volume_pctl=tuple(float(v) for v in np.quantile(volumes, levels)),
        min_volume=float(volumes.min()),
        max_volume=float(volumes.max()),
        first_volume=float(volumes[0]),
        last_volume=float(volumes[-1]),
        mean_volume=float(volumes.mean()),
        volume_vol=float(np.std(volumes)),
        delta_volume=float(volumes[-1] - volumes[0]),
        sum_volume=float(volumes.sum()),
        trade_count=int(n),
        vwap=vwap,
        momentum=float(momentum),
    )


def compute_stats(window: Sequence) -> SideWindowStats:
    """All 32 statistics of one side's trades in one window.

    Percentiles use linear interpolation between order statistics;
    volatility uses population (1/n) normalization; first/last follow
    (exec_time, seq) order. The window must be non-empty.
    """
    if not window:
        raise ValueError("compute_stats requires a non-empty window")
    ordered = sorted(window, key=lambda t: (to_micros(t.exec_time), t.seq))
    prices = np.array([t.price for t in ordered], dtype=float)
    volumes = np.array([t.volume for t in ordered], dtype=float)
    return _stats_from_arrays(prices, volumes)


def window_trades(trades_side: Sequence, t_f: dt.datetime, window) -> list:
    """Trades of one side with exec_time in (t_f - window, t_f]; the
    unbounded window keeps everything up to t_f."""
    t_f_us = to_micros(t_f)
    label = _window_label(window)
    if label == "inf":
        return [t for t in trades_side if to_micros(t.exec_time) <= t_f_us]
    lo = t_f_us - int(float(label) * 60_000_000)
    return [t for t in trades_side if lo < to_micros(t.exec_time) <= t_f_us]


def _side_window_stats(times_us: np.ndarray, prices: np.ndarray,
                       volumes: np.ndarray, t_f_us: int) -> Optional[List[SideWindowStats]]:
    """Stats for every window of one side, with empty-window fallback.

    Arrays must be sorted by (exec_time, seq) and truncated to exec <= t_f.
    Returns None when the side has no history at all.
    """
    if times_us.size == 0:
        return None
    per_window: List[Optional[SideWindowStats]] = []
    start_indices = []
    for w in WINDOW_MINUTES:
        if w == math.inf:
            start_indices.append(0)
        else:
            lo = t_f_us - int(w * 60_000_000)
            start_indices.append(int(np.searchsorted(times_us, lo, side="right")))
    for start in start_indices:
        if start < times_us.size:
            per_window.append(_stats_from_arrays(prices[start:], volumes[start:]))
        else:
            per_window.append(None)
    # nested windows share the right endpoint, so non-empty ones form a suffix
    for i in range(len(per_window) - 2, -1, -1):
        if per_window[i] is None:
            per_window[i] = per_window[i + 1]
    return per_window  # type: ignore[return-value]


def extract_features(trades: Sequence, t_f: dt.datetime) -> Optional[np.ndarray]:
    """The 384-value feature vector for one product at forecast time t_f,
    or None when either side has an empty full-history window (discard)."""
    t_f_us = to_micros(t_f)
    by_side: Dict[str, list] = {"buy": [], "sell": []}
    for t in trades:
        us = to_micros(t.exec_time)
        if us <= t_f_us:
            by_side["buy" if t.side == "+" else "sell"].append((us, t.seq, t.price, t.volume))

    vec = np.empty(N_FEATURES, dtype=float)
    for side in SIDE_LABELS:
        rows = sorted(by_side[side])
        times_us = np.array([r[0] for r in rows], dtype=np.int64)
        prices = np.array([r[2] for r in rows], dtype=float)
        volumes = np.array([r[3] for r in rows], dtype=float)
        stats = _side_window_stats(times_us, prices, volumes, t_f_us)
        if stats is None:
            return None
        for label, sw in zip(WINDOW_LABELS, stats):
            vec[_SCATTER[(side, label)]] = sw.as_array()
    return vec
