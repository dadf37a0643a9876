"""Shared desk-scale experiment setups for the heavier tests."""

from __future__ import annotations

import datetime as dt

from bookcast.market import ProductSpec, SplitBoundaries
from bookcast.selection import SolverConfig, default_alpha_grid
from bookcast.synth import SynthConfig, build_domain
from bookcast.util import UTC

SPEC_60 = ProductSpec(market="DE", product_type="60min")
START = dt.datetime(2024, 3, 1, tzinfo=UTC)

SMALL_GRID = default_alpha_grid(6)
# structural tests only need a roughly-converged selection
FAST_SOLVER = SolverConfig(max_iter=300, stages=2)


def horizon(days):
    return START, START + dt.timedelta(days=days)


def boundaries(days_train, days_val, days_total):
    return SplitBoundaries(START + dt.timedelta(days=days_train),
                           START + dt.timedelta(days=days_train + days_val),
                           START + dt.timedelta(days=days_total))


def tiny_domain(name="A", seed=1, liquidity=15.0, days=7, spec=SPEC_60,
                volatility=4.0):
    cfg = SynthConfig(seed=seed, liquidity=liquidity, volatility=volatility,
                      session_hours=8.0)
    start, end = horizon(days)
    dom, _ = build_domain(name, cfg, spec, start, end,
                          boundaries(days - 3, 1, days))
    return dom
