"""Extract the 384-feature vector for one delivery product.

32 statistics per market side and look-back window: price and volume
percentiles, extremes, first/last, volatilities, deltas, VWAP, momentum,
trade count and summed volume, over windows of 1/5/15/60/180 minutes and
the full history before the forecast time.
"""

import datetime as dt

import numpy as np

from bookcast import ProductSpec, SynthConfig, generate
from bookcast.features import FEATURE_NAMES, extract_features, parse_feature_name
from bookcast.market import build_samples
from bookcast.util import UTC

spec = ProductSpec(market="DE", product_type="60min")
start = dt.datetime(2024, 3, 1, tzinfo=UTC)
end = start + dt.timedelta(days=1)
data = generate(SynthConfig(seed=3, liquidity=30.0), spec, start, end)

samples, report = build_samples(data.trades, spec, start, end)
print(f"built {report.n_built} samples; {report.n_discarded_features} discarded, "
      f"{report.n_missing_target} without a target")

s = samples[12]
print(f"\nproduct {s.delivery_time:%Y-%m-%d %H:%M}, forecast at {s.forecast_time:%H:%M}, "
      f"target ID3 = {s.target_id3:.2f}")
print(f"feature vector length: {len(s.features)}")

names = list(FEATURE_NAMES)
for col in ("last_price|buy|inf", "vwap|sell|15", "price_pctl|buy|60|90",
            "trade_count|sell|5", "momentum|buy|180"):
    print(f"  {col:26s} = {s.features[names.index(col)]:10.4f}")

# group counts behind the 384 = 32 x 2 x 6 decomposition
families = sorted({parse_feature_name(n)[0] for n in names})
print(f"\n{len(families)} families x expansions -> "
      f"{len(names) // 12} stats per (side, window) x 2 sides x 6 windows")

# empty short windows inherit the next longer window's statistics
thin = generate(SynthConfig(seed=9, liquidity=2.0), spec, start, end)
vec = extract_features([t for t in thin.trades if t.product_start == s.delivery_time],
                       s.forecast_time)
if vec is not None:
    w1 = vec[names.index("vwap|buy|1")]
    w5 = vec[names.index("vwap|buy|5")]
    print(f"thin market: vwap|buy|1 = {w1:.4f}, vwap|buy|5 = {w5:.4f} "
          f"({'fallback active' if w1 == w5 else 'independent windows'})")
