"""Standard errors for the fixed-effects threshold fit.

Three covariance estimators share the bread matrix ``C = (X'X)^{-1}`` of the
full design (region dummies plus slope block), computed by block inversion
so the dummy matrix is never materialised:

- ``usual``: homoskedastic ``sigma^2 * C`` with
  ``sigma^2 = RSS / (N - k - n_regions)``;
- ``robust1``: heteroskedasticity- and autocorrelation-robust sandwich with
  Bartlett weights over lagged score products within each region
  (cross-region products are zero);
- ``robust2``: the same kernel applied to per-date cross-sectional sums of
  the scores, additionally robust to contemporaneous and lagged dependence
  across regions.

Lags are measured in calendar days: a day with no observation contributes a
zero score row, so gaps widen the effective lag rather than silently
shrinking it.  With a single region, ``robust2`` therefore equals
``robust1`` exactly.  No small-sample correction is applied beyond the
``usual`` residual-variance divisor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .panel import PanelData, ThresholdFitResult, _demean_by_group, _group_means


def default_truncation_lag(t_max_days: int) -> int:
    """Integer part of the cube root of the longest region span in days.

    Uses exact integer bracketing so spans sitting on a perfect cube never
    round across the boundary.
    """
    if t_max_days < 1:
        raise ValueError(f"time span must be >= 1 day, got {t_max_days}")
    lag = int(round(t_max_days ** (1.0 / 3.0)))
    while lag > 1 and lag * lag * lag > t_max_days:
        lag -= 1
    while (lag + 1) ** 3 <= t_max_days:
        lag += 1
    return max(lag, 1)


@dataclass
class _DesignBundle:
    """Everything the covariance estimators share for one fit."""

    names: list[str]
    estimates: np.ndarray
    bread: np.ndarray  # (n + k) x (n + k) inverse Gram of the full design
    scores: np.ndarray  # N x (n + k); row i is x_i * u_i with the dummy slot filled
    codes: np.ndarray
    day_numbers: np.ndarray
    n_regions: int
    n_slopes: int
    rss: float


def _build_design(panel: PanelData, fit: ThresholdFitResult) -> _DesignBundle:
    codes = panel.region_codes
    regions = panel.regions
    n = len(regions)
    u = np.asarray(fit.residuals, dtype=float)
    if len(u) != panel.n_obs:
        raise ValueError("fit residuals do not match the panel")

    slope_names = fit.design_names
    k = len(slope_names)
    if k:
        x, ind = panel.design(fit.tau)
        z = np.column_stack([x, ind]) if fit.kappa_identified else x
        z_dm = _demean_by_group(z, codes, n)
        gram = z_dm.T @ z_dm
        a = np.linalg.inv(gram)
        z_bar = _group_means(z, codes, n)
    else:
        z = np.empty((panel.n_obs, 0))
        a = np.empty((0, 0))
        z_bar = np.empty((n, 0))

    counts = np.bincount(codes, minlength=n).astype(float)
    bread = np.empty((n + k, n + k))
    bread[:n, :n] = np.diag(1.0 / counts) + (z_bar @ a @ z_bar.T if k else 0.0)
    bread[:n, n:] = -z_bar @ a
    bread[n:, :n] = bread[:n, n:].T
    bread[n:, n:] = a

    scores = np.zeros((panel.n_obs, n + k))
    scores[np.arange(panel.n_obs), codes] = u
    if k:
        scores[:, n:] = z * u[:, None]

    alpha_vec = np.array([fit.alpha[r] for r in regions], dtype=float)
    estimates = np.concatenate([alpha_vec, fit.coefficient_vector()])
    names = [f"alpha:{r}" for r in regions] + slope_names
    return _DesignBundle(
        names=names,
        estimates=estimates,
        bread=bread,
        scores=scores,
        codes=codes,
        day_numbers=panel.day_numbers,
        n_regions=n,
        n_slopes=k,
        rss=float(u @ u),
    )


def _bartlett_meat(rows: np.ndarray, lag: int) -> np.ndarray:
    """Bartlett-weighted sum of lagged outer products of ``rows`` (T x m)."""
    omega = rows.T @ rows
    t_len = rows.shape[0]
    for ell in range(1, min(lag, t_len - 1) + 1):
        weight = 1.0 - ell / (lag + 1.0)
        gamma = rows[ell:].T @ rows[:-ell]
        omega += weight * (gamma + gamma.T)
    return omega


def _pad_by_day(rows: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Place score rows on a daily grid, summing rows that share a day."""
    grid = np.zeros((int(offsets.max()) + 1, rows.shape[1]))
    np.add.at(grid, offsets, rows)
    return grid


def usual_cov(panel: PanelData, fit: ThresholdFitResult) -> tuple[np.ndarray, list[str]]:
    """Homoskedastic covariance ``sigma^2 (X'X)^{-1}`` of the full design."""
    b = _build_design(panel, fit)
    dof = panel.n_obs - b.n_slopes - b.n_regions
    if dof <= 0:
        raise ValueError(
            f"no residual degrees of freedom: {panel.n_obs} observations, "
            f"{b.n_slopes + b.n_regions} parameters"
        )
    sigma2 = b.rss / dof
    return sigma2 * b.bread, b.names


def newey_west_cov(
    panel: PanelData, fit: ThresholdFitResult, lag: int | None = None
) -> tuple[np.ndarray, list[str]]:
    """HAC sandwich with within-region Bartlett-weighted score products."""
    b = _build_design(panel, fit)
    if lag is None:
        lag = default_truncation_lag(fit.t_max)
    if lag < 0:
        raise ValueError(f"lag must be non-negative, got {lag}")
    dim = b.scores.shape[1]
    meat = np.zeros((dim, dim))
    days = b.day_numbers
    for j in range(b.n_regions):
        rows_idx = np.flatnonzero(b.codes == j)
        offsets = days[rows_idx]
        offsets = offsets - offsets.min()
        meat += _bartlett_meat(_pad_by_day(b.scores[rows_idx], offsets), lag)
    return b.bread @ meat @ b.bread, b.names


def driscoll_kraay_cov(
    panel: PanelData, fit: ThresholdFitResult, lag: int | None = None
) -> tuple[np.ndarray, list[str]]:
    """HAC sandwich on per-date cross-sectional sums of the scores."""
    b = _build_design(panel, fit)
    if lag is None:
        lag = default_truncation_lag(fit.t_max)
    if lag < 0:
        raise ValueError(f"lag must be non-negative, got {lag}")
    offsets = b.day_numbers - b.day_numbers.min()
    meat = _bartlett_meat(_pad_by_day(b.scores, offsets), lag)
    return b.bread @ meat @ b.bread, b.names


def _se(cov: np.ndarray) -> np.ndarray:
    diag = np.diag(cov).copy()
    diag[diag < 0] = 0.0  # numerical noise on exactly-zero variances
    return np.sqrt(diag)


def usual_se(panel: PanelData, fit: ThresholdFitResult) -> np.ndarray:
    return _se(usual_cov(panel, fit)[0])


def newey_west_se(panel: PanelData, fit: ThresholdFitResult, lag: int | None = None) -> np.ndarray:
    return _se(newey_west_cov(panel, fit, lag)[0])


def driscoll_kraay_se(panel: PanelData, fit: ThresholdFitResult, lag: int | None = None) -> np.ndarray:
    return _se(driscoll_kraay_cov(panel, fit, lag)[0])


@dataclass
class CovarianceReport:
    """Estimates with all three SE flavors and t-ratios, in design order.

    Names are ``alpha:<region>`` for the intercepts followed by the slope
    names; the threshold indicator (when identified) comes last.
    """

    names: list[str]
    estimates: np.ndarray
    se_usual: np.ndarray
    se_robust1: np.ndarray
    se_robust2: np.ndarray
    lag: int

    def _t(self, se: np.ndarray) -> np.ndarray:
        return np.divide(
            self.estimates, se, out=np.full_like(self.estimates, np.nan), where=se > 0
        )

    @property
    def t_usual(self) -> np.ndarray:
        return self._t(self.se_usual)

    @property
    def t_robust1(self) -> np.ndarray:
        return self._t(self.se_robust1)

    @property
    def t_robust2(self) -> np.ndarray:
        return self._t(self.se_robust2)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "name": self.names,
                "estimate": self.estimates,
                "se_usual": self.se_usual,
                "t_usual": self.t_usual,
                "se_robust1": self.se_robust1,
                "t_robust1": self.t_robust1,
                "se_robust2": self.se_robust2,
                "t_robust2": self.t_robust2,
            }
        )

    def row(self, name: str) -> dict[str, float]:
        idx = self.names.index(name)
        return {
            "estimate": float(self.estimates[idx]),
            "se_usual": float(self.se_usual[idx]),
            "se_robust1": float(self.se_robust1[idx]),
            "se_robust2": float(self.se_robust2[idx]),
            "t_usual": float(self.t_usual[idx]),
            "t_robust1": float(self.t_robust1[idx]),
            "t_robust2": float(self.t_robust2[idx]),
        }


def covariance_report(
    panel: PanelData, fit: ThresholdFitResult, lag: int | None = None
) -> CovarianceReport:
    """All three SE flavors for one fit, sharing a single truncation lag."""
    if lag is None:
        lag = default_truncation_lag(fit.t_max)
    v_usual, names = usual_cov(panel, fit)
    v_nw, _ = newey_west_cov(panel, fit, lag)
    v_dk, _ = driscoll_kraay_cov(panel, fit, lag)
    b_est = _build_design(panel, fit)
    return CovarianceReport(
        names=names,
        estimates=b_est.estimates,
        se_usual=_se(v_usual),
        se_robust1=_se(v_nw),
        se_robust2=_se(v_dk),
        lag=int(lag),
    )
