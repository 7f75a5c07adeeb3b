"""Transforms from reported daily case counts to the panel regression inputs.

The chain implemented here turns a raw reported-incidence series into the
per-capita quantities used downstream:

1. seven-day smoothing of reported counts (widening prefix window, so the
   series keeps its original length and start date),
2. under-reporting correction via a daily multiplication-factor schedule,
3. accumulation into the cumulative infected share ``c``,
4. the active-infection share ``i`` implied by a geometric recovery process
   with daily recovery rate ``gamma``,
5. the regression left-hand side ``y``, the transmission rate on day ``t``
   expressed in units of the recovery rate.

All shares are per capita (fractions of the region population); ``dc_per_100k``
is the only rate expressed per 100,000 people.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

#: Default daily recovery rate: mean infectious period of 14 days.
GAMMA_DEFAULT = 1.0 / 14.0

_DAY = np.timedelta64(1, "D")


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class RegionSeries:
    """Daily reported new cases for one region on a contiguous date index.

    Attributes
    ----------
    region_id : str
        Stable region key (state or country name).
    population : float
        Region population, > 0.
    dates : np.ndarray
        ``datetime64[D]`` array, strictly consecutive calendar days.
    reported_new : np.ndarray
        Reported new cases per day (absolute counts, >= 0 and finite).
    observed : np.ndarray
        Boolean mask, ``False`` on days the source did not report and the
        count was filled with zero to keep the index contiguous.
    """

    region_id: str
    population: float
    dates: np.ndarray
    reported_new: np.ndarray
    observed: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not self.region_id:
            raise ValueError("region_id must be non-empty")
        if not (self.population > 0 and math.isfinite(self.population)):
            raise ValueError(f"population must be positive and finite, got {self.population}")
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        counts = _as_float_array(self.reported_new, "reported_new")
        if dates.shape != counts.shape:
            raise ValueError("dates and reported_new must have equal length")
        if len(dates) == 0:
            raise ValueError("series must contain at least one day")
        if len(dates) > 1 and not np.all(np.diff(dates) == _DAY):
            raise ValueError(f"dates must be consecutive calendar days for {self.region_id}")
        if not np.all(np.isfinite(counts)):
            raise ValueError(f"reported_new contains non-finite values for {self.region_id}")
        if np.any(counts < 0):
            raise ValueError(f"reported_new contains negative values for {self.region_id}")
        observed = self.observed
        if observed is None:
            observed = np.ones(len(dates), dtype=bool)
        observed = np.asarray(observed, dtype=bool)
        if observed.shape != dates.shape:
            raise ValueError("observed mask must match series length")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "reported_new", counts)
        object.__setattr__(self, "observed", observed)

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class MFSchedule:
    """Daily under-reporting multiplication factors.

    ``values[d]`` multiplies the reported count on day ``d`` to approximate
    true infections.  Factors must be finite and >= 1 (reporting never
    exceeds true incidence).
    """

    values: np.ndarray
    mf_start: float
    mf_end: float

    def __post_init__(self):
        values = _as_float_array(self.values, "values")
        if len(values) == 0:
            raise ValueError("schedule must cover at least one day")
        if not np.all(np.isfinite(values)):
            raise ValueError("multiplication factors must be finite")
        if np.any(values < 1.0):
            raise ValueError("multiplication factors must be >= 1")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class EpiFrame:
    """Per-region daily frame holding every series the panel builder needs.

    All arrays share the ``dates`` index.  ``y[t]`` is the transmission rate
    on day ``t`` divided by ``gamma``; it uses the cumulative share of day
    ``t + 1`` and is therefore NaN on the final day and wherever ``i`` is 0.
    """

    region_id: str
    population: float
    dates: np.ndarray
    reported_new: np.ndarray
    adjusted_new: np.ndarray  # per-capita corrected new infections
    c: np.ndarray  # cumulative infected share
    i: np.ndarray  # active infected share
    y: np.ndarray  # transmission rate / gamma, NaN where undefined
    dc_per_100k: np.ndarray  # daily new reported cases per 100k (threshold basis)
    observed: np.ndarray
    gamma: float

    def __post_init__(self):
        n = len(self.dates)
        for name in ("reported_new", "adjusted_new", "c", "i", "y", "dc_per_100k", "observed"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length does not match dates")
        if np.any(self.c < 0) or np.any(self.c >= 1.0):
            raise ValueError(f"cumulative share must stay in [0, 1) for {self.region_id}")
        if np.any(np.diff(self.c) < 0):
            raise ValueError(f"cumulative share must be non-decreasing for {self.region_id}")
        if np.any(self.i < 0):
            raise ValueError(f"active share must be non-negative for {self.region_id}")

    def __len__(self) -> int:
        return len(self.dates)


def seven_day_ma(values) -> np.ndarray:
    """Trailing seven-day moving average with a widening prefix window.

    The first six entries average only the days available so far (window
    widths 1..6), so the output has the same length and start date as the
    input and an outbreak is never shifted later by smoothing.

    Parameters
    ----------
    values : array-like
        Daily values, length >= 1.

    Returns
    -------
    np.ndarray
        Smoothed series of equal length.
    """
    arr = _as_float_array(values, "values")
    if len(arr) == 0:
        raise ValueError("cannot smooth an empty series")
    csum = np.concatenate(([0.0], np.cumsum(arr)))
    n = len(arr)
    idx = np.arange(n)
    lo = np.maximum(idx - 6, 0)
    width = idx - lo + 1
    return (csum[idx + 1] - csum[lo]) / width


def build_mf_schedule(mf_start: float, mf_end: float, horizon: int) -> MFSchedule:
    """Linearly interpolated multiplication factors over ``horizon`` days.

    Day 0 gets ``mf_start``, the final day gets ``mf_end``.

    Examples
    --------
    >>> build_mf_schedule(5.0, 2.0, 4).values
    array([5., 4., 3., 2.])
    """
    if horizon < 2:
        raise ValueError(f"horizon must be >= 2, got {horizon}")
    for name, value in (("mf_start", mf_start), ("mf_end", mf_end)):
        if not (math.isfinite(value) and value >= 1.0):
            raise ValueError(f"{name} must be finite and >= 1, got {value}")
    values = np.linspace(float(mf_start), float(mf_end), int(horizon))
    return MFSchedule(values=values, mf_start=float(mf_start), mf_end=float(mf_end))


def mf_for_region(
    series: RegionSeries, mf_start: float, mf_end: float, align: str = "first_case"
) -> MFSchedule:
    """Multiplication-factor schedule aligned to one region's series.

    With ``align="first_case"`` (default) the linear decline runs from the
    region's first day with a positive reported count to the final day of
    the series, so the correction tracks each region's epidemic age.  Days
    before the first case carry ``mf_start`` (they multiply zeros).  With
    ``align="calendar"`` the decline spans the whole series unconditionally.
    """
    if align not in ("first_case", "calendar"):
        raise ValueError(f"unknown alignment {align!r}")
    n = len(series)
    if align == "first_case":
        positive = np.flatnonzero(series.reported_new > 0)
        if len(positive) == 0:  # nothing to correct: flat schedule
            values = np.full(n, float(mf_start))
            return MFSchedule(values=values, mf_start=float(mf_start), mf_end=float(mf_end))
        start_idx = int(positive[0])
    else:
        start_idx = 0
    span = n - start_idx
    if span >= 2:
        tail = np.linspace(float(mf_start), float(mf_end), span)
    else:
        tail = np.full(span, float(mf_start))
    values = np.concatenate((np.full(start_idx, float(mf_start)), tail))
    return MFSchedule(values=values, mf_start=float(mf_start), mf_end=float(mf_end))


def adjust_and_accumulate(
    reported_new: np.ndarray,
    population: float,
    mf_values: np.ndarray,
    smoothing: bool = True,
    smooth_then_scale: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Correct reported counts for under-reporting and accumulate shares.

    Parameters
    ----------
    reported_new : np.ndarray
        Daily reported new cases (absolute counts).
    population : float
        Region population.
    mf_values : np.ndarray
        Daily multiplication factors, same length as the series.
    smoothing : bool
        Apply the seven-day moving average before accumulation.
    smooth_then_scale : bool
        When smoothing, smooth the reported series first and then apply the
        factors (default).  Set ``False`` to scale raw counts first and
        smooth the corrected series instead.

    Returns
    -------
    (adjusted_new, c) : tuple of np.ndarray
        Per-capita corrected daily new infections and their running sum,
        the cumulative infected share.

    Raises
    ------
    ValueError
        If lengths disagree or the cumulative share reaches 1.
    """
    counts = _as_float_array(reported_new, "reported_new")
    mf = _as_float_array(mf_values, "mf_values")
    if len(mf) != len(counts):
        raise ValueError(
            f"multiplication factors cover {len(mf)} days but the series has {len(counts)}"
        )
    if smoothing:
        if smooth_then_scale:
            adjusted_abs = seven_day_ma(counts) * mf
        else:
            adjusted_abs = seven_day_ma(counts * mf)
    else:
        adjusted_abs = counts * mf
    adjusted_new = adjusted_abs / float(population)
    c = np.cumsum(adjusted_new)
    if c.size and c[-1] >= 1.0:
        raise ValueError("cumulative infected share reached 1; inputs are inconsistent")
    return adjusted_new, c


def active_infections(adjusted_new: np.ndarray, gamma: float = GAMMA_DEFAULT) -> np.ndarray:
    """Active infected share implied by daily recoveries at rate ``gamma``.

    Starting from zero before the series, each day recovers a share
    ``gamma`` of the stock and adds the day's new infections:
    ``i[t] = (1 - gamma) * i[t-1] + adjusted_new[t]``.

    Examples
    --------
    >>> active_infections(np.array([0.1, 0.0, 0.0]), gamma=0.5)
    array([0.1  , 0.05 , 0.025])
    """
    if not (0.0 < gamma <= 1.0):
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    dc = _as_float_array(adjusted_new, "adjusted_new")
    if np.any(dc < 0):
        raise ValueError("adjusted_new must be non-negative")
    i = np.empty_like(dc)
    keep = 1.0 - gamma
    stock = 0.0
    for t in range(len(dc)):
        stock = keep * stock + dc[t]
        i[t] = stock
    return i


def transmission_lhs(
    c: np.ndarray,
    i: np.ndarray,
    gamma: float = GAMMA_DEFAULT,
    dc: np.ndarray | None = None,
) -> np.ndarray:
    """Transmission rate over recovery rate implied by the survival ratio.

    For each day ``t`` with active share ``i[t] > 0``::

        y[t] = -log((1 - c[t+1]) / (1 - c[t])) / (gamma * i[t])

    evaluated as ``-log1p(-dc[t+1] / (1 - c[t]))`` to stay accurate when the
    daily change is many orders of magnitude below 1.  Entries with
    ``i[t] == 0`` and the final day (no day-ahead share) are NaN.

    Parameters
    ----------
    c : np.ndarray
        Cumulative infected share, non-decreasing, within [0, 1).
    i : np.ndarray
        Active infected share, same length, >= 0.
    gamma : float
        Daily recovery rate in (0, 1].
    dc : np.ndarray, optional
        Exact daily increments of ``c``.  Defaults to ``diff(c)``; pass the
        accumulator's own increments to avoid re-deriving them by
        subtraction.

    Returns
    -------
    np.ndarray
        ``y`` of the same length as ``c``, NaN where undefined.
    """
    if not (0.0 < gamma <= 1.0):
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    c = _as_float_array(c, "c")
    i = _as_float_array(i, "i")
    if len(i) != len(c):
        raise ValueError("c and i must have equal length")
    if np.any(c < 0) or np.any(c >= 1.0):
        raise ValueError("cumulative share must lie in [0, 1)")
    if np.any(i < 0):
        raise ValueError("active share must be non-negative")
    if dc is None:
        dc = np.diff(c)
    else:
        dc = _as_float_array(dc, "dc")
        if len(dc) == len(c):  # full increment series: drop day 0
            dc = dc[1:]
        elif len(dc) != len(c) - 1:
            raise ValueError("dc must hold the day-to-day increments of c")
    if np.any(dc < 0):
        raise ValueError("cumulative share must be non-decreasing")
    y = np.full(len(c), np.nan)
    if len(c) < 2:
        return y
    head_c = c[:-1]
    head_i = i[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_log = np.log1p(-dc / (1.0 - head_c))
        vals = -ratio_log / (gamma * head_i)
    defined = head_i > 0
    y[:-1][defined] = vals[defined]
    return y


def build_epi_frame(
    series: RegionSeries,
    mf: MFSchedule,
    gamma: float = GAMMA_DEFAULT,
    smoothing: bool = True,
    smooth_then_scale: bool = True,
    threshold_from_adjusted: bool = False,
) -> EpiFrame:
    """Run the full transform chain for one region.

    The threshold basis ``dc_per_100k`` uses the (optionally smoothed)
    reported series by default; set ``threshold_from_adjusted`` to base it
    on the under-reporting-corrected series instead.
    """
    if len(mf) != len(series):
        raise ValueError(
            f"schedule covers {len(mf)} days but series for {series.region_id} has {len(series)}"
        )
    adjusted_new, c = adjust_and_accumulate(
        series.reported_new,
        series.population,
        mf.values,
        smoothing=smoothing,
        smooth_then_scale=smooth_then_scale,
    )
    i = active_infections(adjusted_new, gamma=gamma)
    y = transmission_lhs(c, i, gamma=gamma, dc=adjusted_new)
    if threshold_from_adjusted:
        thr_abs = adjusted_new * series.population
    else:
        thr_abs = seven_day_ma(series.reported_new) if smoothing else series.reported_new
    dc_per_100k = thr_abs / series.population * 1e5
    return EpiFrame(
        region_id=series.region_id,
        population=series.population,
        dates=series.dates,
        reported_new=series.reported_new,
        adjusted_new=adjusted_new,
        c=c,
        i=i,
        y=y,
        dc_per_100k=dc_per_100k,
        observed=series.observed,
        gamma=gamma,
    )
