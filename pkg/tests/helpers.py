"""Shared constructors and brute-force covariance oracles for tests."""

import numpy as np
import pandas as pd

from r0panel import PanelData, RegionSeries


def make_series(reported, start="2020-03-01", population=1_000_000.0, observed=None, region="A"):
    reported = np.asarray(reported, dtype=float)
    dates = np.datetime64(start, "D") + np.arange(len(reported))
    return RegionSeries(
        region_id=region,
        population=population,
        dates=dates,
        reported_new=reported,
        observed=observed,
    )


def small_panel(n_regions=3, n_days=12, seed=2, gap_region=None, date_block_offsets=None):
    """Random panel with two covariates and a varying threshold column.

    ``gap_region`` removes two mid-sample days from one region;
    ``date_block_offsets`` places the regions on disjoint calendar blocks.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for j in range(n_regions):
        start = np.datetime64("2020-03-01")
        if date_block_offsets is not None:
            start += date_block_offsets[j]
        dates = [start + d for d in range(n_days)]
        if gap_region is not None and j == gap_region:
            dates = dates[:5] + dates[7:]
        for d in dates:
            rows.append(
                {
                    "region_id": f"R{j}",
                    "date": str(d),
                    "y": rng.normal(2.0 + 0.4 * j, 0.6),
                    "x1": rng.uniform(0, 1),
                    "x2": rng.uniform(0, 1),
                    "thr_var": rng.uniform(0, 2),
                }
            )
    return PanelData(frame=pd.DataFrame(rows), x_names=["x1", "x2"], lag_p=10)


def explicit_full_design(panel, fit):
    """Dummy-augmented design matrix built the slow, obvious way."""
    regions = panel.regions
    dummies = np.column_stack(
        [(panel.frame["region_id"] == r).to_numpy(dtype=float) for r in regions]
    )
    x, ind = panel.design(fit.tau)
    blocks = [dummies]
    if x.size:
        blocks.append(x)
    if fit.kappa_identified:
        blocks.append(ind[:, None])
    return np.hstack(blocks)


def brute_force_cov(panel, fit, lag, cross_region):
    """Sandwich covariance via an explicit observation-pair double loop.

    Weights are Bartlett in calendar days, ``max(0, 1 - |d_s - d_t|/(lag+1))``;
    ``cross_region=False`` keeps only same-region pairs (within-region HAC),
    ``True`` keeps every pair (cross-sectional-sum HAC).  Everything —
    coefficients, residuals, bread — is recomputed from the raw design so the
    oracle shares no code with the estimators under test.
    """
    design = explicit_full_design(panel, fit)
    y = panel.frame["y"].to_numpy(dtype=float)
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    u = y - design @ beta
    scores = design * u[:, None]
    days = panel.day_numbers
    codes = panel.region_codes
    n = len(y)
    meat = np.zeros((design.shape[1], design.shape[1]))
    for s in range(n):
        for t in range(n):
            if not cross_region and codes[s] != codes[t]:
                continue
            gap = abs(int(days[s]) - int(days[t]))
            if gap > lag:
                continue
            weight = 1.0 - gap / (lag + 1.0)
            meat += weight * np.outer(scores[s], scores[t])
    bread = np.linalg.inv(design.T @ design)
    return bread @ meat @ bread
