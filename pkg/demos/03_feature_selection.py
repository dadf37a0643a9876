"""Sparse feature selection with L1-penalized linear quantile regression.

Fits are tuned per quantile level on validation pinball loss over a
log-spaced penalty grid; features with non-zero standardized coefficients
are retained. Importance aggregates |coefficient| across quantiles and is
broken down by family, window, and side.
"""

import datetime as dt

from bookcast import ProductSpec, SplitBoundaries, SynthConfig
from bookcast.selection import SolverConfig, default_alpha_grid, importance_breakdown, top_k
from bookcast.synth import build_domain
from bookcast.transfer import ensure_selection
from bookcast.util import UTC

spec = ProductSpec(market="DE", product_type="60min")
start = dt.datetime(2024, 3, 1, tzinfo=UTC)
days = 14
end = start + dt.timedelta(days=days)
bounds = SplitBoundaries(start + dt.timedelta(days=9),
                         start + dt.timedelta(days=11), end)

cfg = SynthConfig(seed=5, liquidity=25.0, volatility=5.0, half_spread=8.0,
                  session_hours=8.0)
domain, _ = build_domain("demo", cfg, spec, start, end, bounds)

quantiles = (0.1, 0.5, 0.9)
sel = ensure_selection(domain, quantiles,
                       alpha_grid=default_alpha_grid(8),
                       solver_cfg=SolverConfig(max_iter=800, stages=2))

print(f"selected feature union: {len(sel.union)} of {len(sel.feature_names)}")
for tau in quantiles:
    print(f"  tau={tau}: {len(sel.per_tau_selected[tau])} features, "
          f"penalty weight {sel.alpha_per_tau[tau]:.3g}")

print("\ntop 5 per quantile (by |coefficient|):")
for tau in quantiles:
    names, short = top_k(sel, tau, 5)
    print(f"  tau={tau}: " + ", ".join(names) + (" (short list)" if short else ""))

br = importance_breakdown(sel)
print("\nimportance share by window (minutes):")
for window, share in sorted(br.by_window.items(), key=lambda kv: -kv[1]):
    print(f"  {window:>4}: {share:6.1%}")
print("by side: " + ", ".join(f"{s}={v:.1%}" for s, v in br.by_side.items()))
top_families = sorted(br.by_family.items(), key=lambda kv: -kv[1])[:5]
print("top families: " + ", ".join(f"{f}={v:.1%}" for f, v in top_families))
