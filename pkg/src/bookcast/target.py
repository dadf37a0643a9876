"""Volume-weighted average price target over the final trading window.

The target index is the VWAP of all trades (both sides) executed in the
closed window [t_d - 180min, t_d - delta_m] before delivery t_d. An empty
window leaves the target undefined and the sample is excluded from
supervised sets.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Optional, Sequence, TYPE_CHECKING

from .util import to_micros

if TYPE_CHECKING:
    from .market import Trade

LEAD_TIME = dt.timedelta(minutes=180)


@dataclass(frozen=True)
class Id3Result:
    value: Optional[float]
    trades_used: int
    volume_sum: float


def compute_id3(trades: Sequence["Trade"], t_d: dt.datetime,
                delta_m: dt.timedelta) -> Id3Result:
    """VWAP of trades with exec_time in [t_d - 180min, t_d - delta_m], both ends closed.

    Accumulates with compensated summation; windows can hold thousands of trades.
    """
    lo = to_micros(t_d - LEAD_TIME)
    hi = to_micros(t_d - delta_m)
    prices = []
    volumes = []
    for tr in trades:
        t = to_micros(tr.exec_time)
        if lo <= t <= hi:
            prices.append(tr.price)
            volumes.append(tr.volume)
    if not prices:
        return Id3Result(value=None, trades_used=0, volume_sum=0.0)
    vol = math.fsum(volumes)
    # centered compensated accumulation: exact for constant prices and
    # stable over long windows
    ref = prices[0]
    dev = math.fsum((p - ref) * v for p, v in zip(prices, volumes))
    return Id3Result(value=ref + dev / vol, trades_used=len(prices),
                     volume_sum=vol)
