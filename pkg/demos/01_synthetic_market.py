"""Generate a synthetic continuous-intraday trading day and inspect it.

The generator drives each delivery product with a latent Gaussian random
walk, draws trade arrivals from a delivery-ramped Poisson process, and
prints trades in the canonical CSV schema. Everything is reproducible from
the seed.
"""

import datetime as dt
import io

from bookcast import ProductSpec, SynthConfig, compute_id3, generate
from bookcast.market import write_trades_csv
from bookcast.util import UTC

spec = ProductSpec(market="DE", product_type="60min")
start = dt.datetime(2024, 3, 1, tzinfo=UTC)
end = start + dt.timedelta(days=1)

cfg = SynthConfig(seed=7, liquidity=25.0, volatility=5.0, base_price=60.0)
data = generate(cfg, spec, start, end)
print(f"{len(data.trades)} trades across 24 hourly products")

# the canonical trade CSV, first rows
buf = io.StringIO()
write_trades_csv(data.trades[:5], buf)
print("\ncanonical CSV sample:")
print(buf.getvalue())

# the forecasting target for one product
t_d = start + dt.timedelta(hours=12)
product_trades = [t for t in data.trades if t.product_start == t_d]
id3 = compute_id3(product_trades, t_d, spec.delta_m)
print(f"product {t_d:%H:%M}: {len(product_trades)} trades, "
      f"ID3 = {id3.value:.2f} EUR/MWh from {id3.trades_used} trades "
      f"({id3.volume_sum:.1f} MWh)")

# liquidity knob: doubling the rate doubles expected trade counts
for lam in (10.0, 20.0, 40.0):
    d = generate(SynthConfig(seed=1, liquidity=lam), spec, start, end)
    print(f"liquidity {lam:5.1f}/h -> {len(d.trades):6d} trades")
