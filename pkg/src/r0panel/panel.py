"""Unbalanced panel assembly and fixed-effects threshold regression.

An observation is one (region, day ``t``) pair carrying the transmission
variable ``y`` for day ``t`` (which embeds the day-ahead cumulative share),
covariates dated ``t - lag_p``, and the threshold basis ``thr_var`` dated
``t - lag_p``.  The estimating equation is

    y[j, t] = alpha[j] + psi' x[j, t - p] + kappa * 1{thr[j, t - p] > tau} + u

fitted by least squares with region fixed effects; ``tau`` is chosen by
profiling the sum of squared residuals over a grid.  The region intercepts
``alpha[j]`` are the per-region reproduction-number estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .epi import GAMMA_DEFAULT, EpiFrame

THRESHOLD_NAME = "threshold_ind"

#: Default covariate publication lag in days between mitigation measures and
#: their imprint on measured transmission.
LAG_P_DEFAULT = 10

_DAY = np.timedelta64(1, "D")


@dataclass
class PanelData:
    """Flat columnar panel plus the covariate layout.

    ``frame`` columns are ``region_id``, ``date`` (ISO string), ``y``, one
    column per covariate in ``x_names`` order, and ``thr_var``; rows are
    sorted by (region_id, date).
    """

    frame: pd.DataFrame
    x_names: list[str]
    lag_p: int
    gamma: float = GAMMA_DEFAULT
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        required = ["region_id", "date", "y", *self.x_names, "thr_var"]
        missing = [c for c in required if c not in self.frame.columns]
        if missing:
            raise ValueError(f"panel frame is missing columns {missing}")
        self.frame = (
            self.frame.loc[:, required]
            .sort_values(["region_id", "date"], kind="mergesort")
            .reset_index(drop=True)
        )
        dup = self.frame.duplicated(["region_id", "date"])
        if dup.any():
            first = self.frame.loc[dup, ["region_id", "date"]].iloc[0]
            raise ValueError(f"duplicate key ({first.region_id}, {first.date}) in panel")

    @property
    def n_obs(self) -> int:
        return len(self.frame)

    @property
    def regions(self) -> list[str]:
        return list(dict.fromkeys(self.frame["region_id"]))

    @property
    def region_codes(self) -> np.ndarray:
        codes, _ = pd.factorize(self.frame["region_id"], sort=True)
        return codes.astype(np.int64)

    @property
    def day_numbers(self) -> np.ndarray:
        """Days since the panel's first date, per observation."""
        dates = pd.to_datetime(self.frame["date"]).to_numpy(dtype="datetime64[D]")
        return (dates - dates.min()).astype("timedelta64[D]").astype(np.int64)

    def region_spans(self) -> dict[str, int]:
        """Per-region time span in days, first to last observation inclusive."""
        dates = pd.to_datetime(self.frame["date"]).to_numpy(dtype="datetime64[D]")
        spans: dict[str, int] = {}
        for region, grp in self.frame.groupby("region_id", sort=True):
            d = dates[grp.index.to_numpy()]
            spans[str(region)] = int((d.max() - d.min()) / _DAY) + 1
        return spans

    def design(self, tau: float) -> tuple[np.ndarray, np.ndarray]:
        """Covariate block and raw threshold indicator for a given ``tau``."""
        x = self.frame[self.x_names].to_numpy(dtype=float) if self.x_names else np.empty((self.n_obs, 0))
        ind = (self.frame["thr_var"].to_numpy(dtype=float) > tau).astype(float)
        return x, ind


@dataclass
class ThresholdFitResult:
    """Fixed-effects threshold fit: coefficients, fit diagnostics, residuals."""

    tau: float
    alpha: dict[str, float]
    psi: dict[str, float]
    kappa: float | None
    kappa_identified: bool
    r_squared: float
    ssr: float
    residuals: np.ndarray
    obs_count: int
    region_count: int
    t_min: int
    t_max: int
    x_names: list[str]
    model: str = "threshold"
    weak_threshold: bool = False
    tau_grid: np.ndarray | None = None
    ssr_profile: np.ndarray | None = None

    @property
    def design_names(self) -> list[str]:
        """Slope-column names in design order (threshold indicator last)."""
        names = list(self.x_names)
        if self.kappa_identified:
            names.append(THRESHOLD_NAME)
        return names

    def coefficient_vector(self) -> np.ndarray:
        vals = [self.psi[name] for name in self.x_names]
        if self.kappa_identified:
            vals.append(self.kappa)
        return np.array(vals, dtype=float)


def _demean_by_group(values: np.ndarray, codes: np.ndarray, n_groups: int) -> np.ndarray:
    """Subtract group means along axis 0 (values may be 1- or 2-D)."""
    counts = np.bincount(codes, minlength=n_groups).astype(float)
    if values.ndim == 1:
        sums = np.bincount(codes, weights=values, minlength=n_groups)
        return values - (sums / counts)[codes]
    out = np.empty_like(values)
    for k in range(values.shape[1]):
        sums = np.bincount(codes, weights=values[:, k], minlength=n_groups)
        out[:, k] = values[:, k] - (sums / counts)[codes]
    return out


def _group_means(values: np.ndarray, codes: np.ndarray, n_groups: int) -> np.ndarray:
    counts = np.bincount(codes, minlength=n_groups).astype(float)
    if values.ndim == 1:
        return np.bincount(codes, weights=values, minlength=n_groups) / counts
    cols = [np.bincount(codes, weights=values[:, k], minlength=n_groups) / counts for k in range(values.shape[1])]
    return np.column_stack(cols) if cols else np.empty((n_groups, 0))


def _collinear_columns(mat: np.ndarray, names: list[str]) -> list[str]:
    """Names of columns that QR pivoting flags as linearly dependent."""
    try:
        from scipy.linalg import qr  # optional; fall back to a greedy scan

        _, r, piv = qr(mat, mode="economic", pivoting=True)
        diag = np.abs(np.diag(r))
        tol = diag.max() * max(mat.shape) * np.finfo(float).eps if diag.size else 0.0
        rank = int((diag > tol).sum())
        return [names[j] for j in sorted(piv[rank:])]
    except ImportError:
        kept: list[int] = []
        dropped: list[str] = []
        for j in range(mat.shape[1]):
            trial = mat[:, kept + [j]]
            if np.linalg.matrix_rank(trial) == len(kept) + 1:
                kept.append(j)
            else:
                dropped.append(names[j])
        return dropped


def build_panel(
    frames: list[EpiFrame],
    covariates: pd.DataFrame | None,
    covariate_names: list[str],
    lag_p: int = LAG_P_DEFAULT,
    window: tuple | None = None,
    extra_interactions: dict[str, tuple[str, str]] | None = None,
) -> PanelData:
    """Assemble the regression panel from per-region frames and covariates.

    Parameters
    ----------
    frames : list of EpiFrame
        One frame per region, each on a contiguous daily index.
    covariates : pd.DataFrame or None
        Long table with columns ``region_id``, ``date`` and one column per
        covariate; keys must be unique.  ``None`` is allowed only when
        ``covariate_names`` is empty.
    covariate_names : list of str
        Covariate columns that enter the regression, in order.
    lag_p : int
        Days between the covariate date and the observation date.
    window : (start, end), optional
        Calendar window of the case data; observations keep dates in
        ``[start, end - 1 day]`` (the last case day only feeds the final
        day-ahead share).  Covariates dated before ``start`` are still used.
    extra_interactions : dict, optional
        ``name -> (col_a, col_b)`` products of covariate-table columns,
        appended to the regressor block after ``covariate_names``.

    Returns
    -------
    PanelData
        Sorted panel; dropped-row accounting is appended to ``warnings``.
    """
    if lag_p < 0:
        raise ValueError(f"lag_p must be non-negative, got {lag_p}")
    interactions = dict(extra_interactions or {})
    x_names = list(covariate_names) + list(interactions)
    needed_cols = list(dict.fromkeys(
        list(covariate_names) + [c for pair in interactions.values() for c in pair]
    ))

    cov_lookup = None
    if needed_cols:
        if covariates is None:
            raise ValueError("covariate table required when covariate_names is non-empty")
        missing = [c for c in needed_cols if c not in covariates.columns]
        if missing:
            raise ValueError(f"covariate table is missing columns {missing}")
        cov = covariates.copy()
        cov["date"] = pd.to_datetime(cov["date"]).dt.strftime("%Y-%m-%d")
        if cov.duplicated(["region_id", "date"]).any():
            dup = cov[cov.duplicated(["region_id", "date"])].iloc[0]
            raise ValueError(f"duplicate key ({dup['region_id']}, {dup['date']}) in covariate table")
        cov_lookup = cov.set_index(["region_id", "date"])[needed_cols]

    win_start = win_end = None
    if window is not None:
        win_start = np.datetime64(pd.Timestamp(window[0]).date(), "D")
        win_end = np.datetime64(pd.Timestamp(window[1]).date(), "D")

    rows: list[pd.DataFrame] = []
    warnings: list[str] = []
    gamma = frames[0].gamma if frames else GAMMA_DEFAULT
    for frame in frames:
        n = len(frame)
        t_idx = np.arange(n)
        keep = ~np.isnan(frame.y)
        n_y_missing = int((~keep).sum())

        lag_idx = t_idx - lag_p
        has_lag = lag_idx >= 0
        n_no_lag = int((keep & ~has_lag).sum())
        keep &= has_lag

        if win_start is not None:
            in_window = (frame.dates >= win_start) & (frame.dates <= win_end - _DAY)
            keep &= in_window

        # The day-ahead increment forming y must come from an actual report.
        next_observed = np.ones(n, dtype=bool)
        next_observed[:-1] = frame.observed[1:]
        n_unobserved = int((keep & ~next_observed).sum())
        keep &= next_observed

        if not keep.any():
            warnings.append(f"region {frame.region_id}: no usable observations")
            continue

        sel = t_idx[keep]
        part = pd.DataFrame(
            {
                "region_id": frame.region_id,
                "date": np.datetime_as_string(frame.dates[sel], unit="D"),
                "y": frame.y[sel],
                "thr_var": frame.dc_per_100k[sel - lag_p],
            }
        )
        if cov_lookup is not None:
            lag_dates = np.datetime_as_string(frame.dates[sel - lag_p], unit="D")
            keys = pd.MultiIndex.from_arrays([np.repeat(frame.region_id, len(sel)), lag_dates])
            vals = cov_lookup.reindex(keys)
            part[needed_cols] = vals.to_numpy(dtype=float)
            before = len(part)
            part = part.dropna(subset=needed_cols)
            n_cov_missing = before - len(part)
        else:
            n_cov_missing = 0

        dropped = {
            "y undefined": n_y_missing,
            "lag precedes series": n_no_lag,
            "covariate missing": n_cov_missing,
            "increment day unobserved": n_unobserved,
        }
        note = ", ".join(f"{v} ({k})" for k, v in dropped.items() if v)
        if note:
            warnings.append(f"region {frame.region_id}: dropped {note}")
        if len(part) == 0:
            warnings.append(f"region {frame.region_id}: no usable observations")
            continue
        for name, (col_a, col_b) in interactions.items():
            part[name] = part[col_a] * part[col_b]
        rows.append(part)

    if not rows:
        raise ValueError("no region contributed any observations")
    frame_all = pd.concat(rows, ignore_index=True)
    panel = PanelData(
        frame=frame_all, x_names=x_names, lag_p=lag_p, gamma=gamma, warnings=warnings
    )
    return panel


def fit_fixed_effects(panel: PanelData, tau: float, include_threshold: bool = True) -> ThresholdFitResult:
    """Least-squares fit with region fixed effects at a fixed threshold.

    The slope block is estimated on within-region demeaned data; intercepts
    are recovered as ``mean_j(y) - mean_j(z)' theta``.  A threshold
    indicator with no within-region variation anywhere is dropped and the
    fit is flagged as not identifying ``kappa``.

    Raises
    ------
    ValueError
        If the demeaned design is rank deficient; the message names the
        collinear columns.
    """
    codes = panel.region_codes
    regions = panel.regions
    n_regions = len(regions)
    y = panel.frame["y"].to_numpy(dtype=float)
    x, ind = panel.design(tau)

    names = list(panel.x_names)
    z = x
    kappa_identified = False
    if include_threshold:
        ind_dm = _demean_by_group(ind, codes, n_regions)
        if np.any(ind_dm != 0.0):
            z = np.column_stack([x, ind]) if x.size else ind[:, None]
            names = names + [THRESHOLD_NAME]
            kappa_identified = True
    if z.ndim == 1:
        z = z[:, None]

    y_dm = _demean_by_group(y, codes, n_regions)
    k = z.shape[1]
    if k:
        z_dm = _demean_by_group(z, codes, n_regions)
        theta, _, rank, _ = np.linalg.lstsq(z_dm, y_dm, rcond=None)
        if rank < k:
            bad = _collinear_columns(z_dm, names)
            raise ValueError(f"design is rank deficient; collinear columns: {bad}")
        resid = y_dm - z_dm @ theta
    else:
        theta = np.empty(0)
        resid = y_dm

    ssr = float(resid @ resid)
    tss = float(y_dm @ y_dm)
    r_squared = 1.0 - ssr / tss if tss > 0 else 0.0

    y_bar = _group_means(y, codes, n_regions)
    z_bar = _group_means(z, codes, n_regions) if k else np.empty((n_regions, 0))
    alpha_vals = y_bar - (z_bar @ theta if k else 0.0)
    alpha = {region: float(a) for region, a in zip(regions, alpha_vals)}

    psi = {name: float(coef) for name, coef in zip(panel.x_names, theta)}
    kappa = float(theta[-1]) if kappa_identified else None

    spans = panel.region_spans()
    return ThresholdFitResult(
        tau=float(tau),
        alpha=alpha,
        psi=psi,
        kappa=kappa,
        kappa_identified=kappa_identified,
        r_squared=r_squared,
        ssr=ssr,
        residuals=resid,
        obs_count=panel.n_obs,
        region_count=n_regions,
        t_min=min(spans.values()),
        t_max=max(spans.values()),
        x_names=list(panel.x_names),
        model="threshold" if include_threshold else "covariates_only",
    )


def default_tau_grid(
    thr_values: np.ndarray,
    step: float = 0.01,
    anchors: tuple[float, ...] = (0.01, 0.40, 0.70),
    max_points: int = 2000,
) -> np.ndarray:
    """Threshold grid spanning the 1st..99th percentile of ``thr_values``.

    The grid walks the percentile range in ``step`` increments (rounded to
    the step's precision), always includes the ``anchors``, and doubles the
    step until at most ``max_points`` remain so extreme threshold ranges
    cannot make the profile search intractable.
    """
    thr = np.asarray(thr_values, dtype=float)
    thr = thr[np.isfinite(thr)]
    if thr.size == 0:
        return np.array(sorted(anchors))
    lo, hi = np.quantile(thr, [0.01, 0.99])
    width = max(hi - lo, 0.0)
    decimals = max(0, -int(math.floor(math.log10(step))))
    while width / step > max_points:
        step *= 2.0  # doubling keeps points exact at the original precision
    start = math.ceil(lo / step)
    stop = math.floor(hi / step)
    points = np.arange(start, stop + 1) * step if stop >= start else np.empty(0)
    grid = np.union1d(np.round(points, decimals), np.asarray(anchors, dtype=float))
    return grid


def profile_threshold_search(
    panel: PanelData,
    tau_grid: np.ndarray | None = None,
    weak_tol: float = 1e-3,
) -> ThresholdFitResult:
    """Profile the fixed-effects SSR over a threshold grid.

    Scans ``tau_grid`` in ascending order keeping the first strictly
    smallest SSR (ties resolve to the smallest threshold), then refits at
    the winner.  The result carries the profile, and ``weak_threshold`` is
    set when the relative SSR spread across the grid is below ``weak_tol``
    or the indicator is degenerate at the winner.
    """
    if tau_grid is None:
        tau_grid = default_tau_grid(panel.frame["thr_var"].to_numpy(dtype=float))
    tau_grid = np.sort(np.unique(np.asarray(tau_grid, dtype=float)))
    if tau_grid.size == 0:
        raise ValueError("tau_grid must contain at least one value")

    codes = panel.region_codes
    n_regions = len(panel.regions)
    y_dm = _demean_by_group(panel.frame["y"].to_numpy(dtype=float), codes, n_regions)
    x, _ = panel.design(tau_grid[0])
    x_dm = _demean_by_group(x, codes, n_regions) if x.size else x
    thr = panel.frame["thr_var"].to_numpy(dtype=float)

    ssr_profile = np.empty(tau_grid.size)
    best_idx = 0
    for g, tau in enumerate(tau_grid):
        ind = (thr > tau).astype(float)
        ind_dm = _demean_by_group(ind, codes, n_regions)
        if np.any(ind_dm != 0.0):
            z_dm = np.column_stack([x_dm, ind_dm]) if x_dm.size else ind_dm[:, None]
        else:
            z_dm = x_dm
        if z_dm.size:
            coef, _, _, _ = np.linalg.lstsq(z_dm, y_dm, rcond=None)
            resid = y_dm - z_dm @ coef
        else:
            resid = y_dm
        ssr_profile[g] = resid @ resid
        if ssr_profile[g] < ssr_profile[best_idx]:
            best_idx = g

    result = fit_fixed_effects(panel, float(tau_grid[best_idx]))
    ssr_max = float(ssr_profile.max())
    spread = (ssr_max - float(ssr_profile.min())) / ssr_max if ssr_max > 0 else 0.0
    result.weak_threshold = bool(spread < weak_tol or not result.kappa_identified)
    result.tau_grid = tau_grid
    result.ssr_profile = ssr_profile
    return result


def counterfactual_fit(panel: PanelData) -> ThresholdFitResult:
    """Intercept-only fit: region means of ``y`` with no mitigation terms.

    Shares the result type (and therefore the whole inference interface)
    with the full model; ``tau`` is NaN and ``kappa`` is not identified.
    """
    codes = panel.region_codes
    regions = panel.regions
    n_regions = len(regions)
    y = panel.frame["y"].to_numpy(dtype=float)
    y_bar = _group_means(y, codes, n_regions)
    resid = y - y_bar[codes]
    ssr = float(resid @ resid)
    spans = panel.region_spans()
    return ThresholdFitResult(
        tau=float("nan"),
        alpha={region: float(a) for region, a in zip(regions, y_bar)},
        psi={},
        kappa=None,
        kappa_identified=False,
        r_squared=0.0,
        ssr=ssr,
        residuals=resid,
        obs_count=panel.n_obs,
        region_count=n_regions,
        t_min=min(spans.values()),
        t_max=max(spans.values()),
        x_names=[],
        model="intercept_only",
    )


def panel_to_csv(panel: PanelData, path) -> None:
    """Write the canonical flat panel table (stable column order, LF endings)."""
    panel.frame.to_csv(path, index=False, lineterminator="\n")


def panel_from_csv(path, lag_p: int = LAG_P_DEFAULT, gamma: float = GAMMA_DEFAULT) -> PanelData:
    """Read a canonical panel table written by :func:`panel_to_csv`."""
    frame = pd.read_csv(
        path, dtype={"region_id": str, "date": str}, float_precision="round_trip"
    )
    fixed = {"region_id", "date", "y", "thr_var"}
    x_names = [c for c in frame.columns if c not in fixed]
    return PanelData(frame=frame, x_names=x_names, lag_p=lag_p, gamma=gamma)
