"""Synthetic panel generator with known coefficients, plus a moment check.

The generator draws covariate paths, then evolves each region's epidemic so
that the transmission variable recovered by the estimation chain equals

    alpha[j] + psi' x[j, t - p] + kappa * 1{thr[j, t - p] > tau} + u[t]

by construction (up to an explicit non-negativity clamp on the transmission
rate, which is counted and reported).  Under-reporting distortion divides
true counts by the same multiplication-factor schedule the correction step
applies, so a correctly configured estimation run inverts it exactly.

``moment_check`` validates the survival-ratio approximation underlying the
whole chain on an integer-population binomial epidemic: the gap between the
exact one-step conditional mean of the susceptible ratio and its
exponential approximation must shrink like 1/population.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .epi import GAMMA_DEFAULT, RegionSeries
from .panel import LAG_P_DEFAULT


@dataclass(frozen=True)
class CovariateProcess:
    """Bounded covariate path: seasonal base plus AR(1) noise, clipped."""

    name: str
    base: float = 0.5
    amplitude: float = 0.25
    period: float = 180.0
    ar_rho: float = 0.9
    ar_sd: float = 0.05
    lo: float = 0.0
    hi: float = 1.0

    def draw(self, horizon: int, phase: float, rng: np.random.Generator) -> np.ndarray:
        t = np.arange(horizon)
        seasonal = self.base + self.amplitude * np.sin(2.0 * math.pi * t / self.period + phase)
        noise = np.empty(horizon)
        shocks = rng.normal(0.0, self.ar_sd, size=horizon)
        level = 0.0
        for s in range(horizon):
            level = self.ar_rho * level + shocks[s]
            noise[s] = level
        return np.clip(seasonal + noise, self.lo, self.hi)


@dataclass
class SimConfig:
    """Generator settings; every field has a deterministic effect per seed."""

    n_regions: int
    horizon: int
    alpha: list[float]
    psi: dict[str, float]
    kappa: float
    tau: float
    lag_p: int = LAG_P_DEFAULT
    gamma: float = GAMMA_DEFAULT
    covariates: list[CovariateProcess] = field(default_factory=list)
    noise_sd: float = 0.0
    mf_start: float | None = None
    mf_end: float | None = None
    population: float | list[float] = 1e7
    seed_cases: float = 10.0
    start_offsets: list[int] | None = None
    start_date: str = "2020-03-01"
    smoothing: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_regions < 1:
            raise ValueError("n_regions must be >= 1")
        if len(self.alpha) != self.n_regions:
            raise ValueError(
                f"alpha has {len(self.alpha)} entries for {self.n_regions} regions"
            )
        cov_names = [p.name for p in self.covariates]
        if len(set(cov_names)) != len(cov_names):
            raise ValueError("covariate process names must be unique")
        unknown = set(self.psi) - set(cov_names)
        if unknown:
            raise ValueError(f"psi names {sorted(unknown)} have no covariate process")
        if (self.mf_start is None) != (self.mf_end is None):
            raise ValueError("mf_start and mf_end must be given together")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        offsets = self.start_offsets
        if offsets is None:
            offsets = [7 * j for j in range(self.n_regions)]
        if len(offsets) != self.n_regions:
            raise ValueError("start_offsets must have one entry per region")
        if any(o < 0 or o >= self.horizon - 1 for o in offsets):
            raise ValueError("start offsets must leave at least two simulated days")
        self.start_offsets = [int(o) for o in offsets]

    def populations(self) -> list[float]:
        if isinstance(self.population, (int, float)):
            return [float(self.population)] * self.n_regions
        if len(self.population) != self.n_regions:
            raise ValueError("population list must have one entry per region")
        return [float(p) for p in self.population]

    def region_ids(self) -> list[str]:
        width = len(str(self.n_regions - 1))
        return [f"R{j:0{width}d}" for j in range(self.n_regions)]


@dataclass
class SimOutput:
    """Synthetic series, covariate table, and the generating truth."""

    series: list[RegionSeries]
    covariates: pd.DataFrame
    truth: dict


def _mf_path(horizon: int, start_idx: int, mf_start: float, mf_end: float) -> np.ndarray:
    """Per-region factor path: flat before the outbreak, then linear decline."""
    span = horizon - start_idx
    if span >= 2:
        tail = np.linspace(mf_start, mf_end, span)
    else:
        tail = np.full(span, mf_start)
    return np.concatenate((np.full(start_idx, mf_start), tail))


def simulate_panel(config: SimConfig) -> SimOutput:
    """Generate reported-case series and covariates with known coefficients."""
    rng = np.random.default_rng(config.seed)
    pops = config.populations()
    ids = config.region_ids()
    dates = np.datetime64(config.start_date, "D") + np.arange(config.horizon)
    cov_names = [p.name for p in config.covariates]
    psi_vec = np.array([config.psi.get(name, 0.0) for name in cov_names])

    series: list[RegionSeries] = []
    cov_rows: list[pd.DataFrame] = []
    alpha_truth: dict[str, float] = {}
    clamped_days = 0

    for j in range(config.n_regions):
        phase = 2.0 * math.pi * j / config.n_regions
        x = np.column_stack(
            [p.draw(config.horizon, phase, rng) for p in config.covariates]
        ) if config.covariates else np.empty((config.horizon, 0))
        shocks = rng.normal(0.0, config.noise_sd, size=config.horizon) if config.noise_sd else np.zeros(config.horizon)

        start = config.start_offsets[j]
        pop = pops[j]
        if config.mf_start is not None:
            mf = _mf_path(config.horizon, start, config.mf_start, config.mf_end)
        else:
            mf = np.ones(config.horizon)

        dc_true = np.zeros(config.horizon)  # per-capita new infections
        reported = np.zeros(config.horizon)  # absolute reported counts
        thr = np.zeros(config.horizon)  # threshold basis as estimation sees it
        dc_true[start] = config.seed_cases / pop
        i_stock = dc_true[start]
        log_surv = math.log1p(-dc_true[start])

        def record_thr(t: int) -> None:
            reported[t] = dc_true[t] * pop / mf[t]
            if config.smoothing:
                lo = max(t - 6, 0)
                window = (reported[lo : t + 1] / pop * 1e5).sum()
                thr[t] = window / (t - lo + 1)
            else:
                thr[t] = reported[t] / pop * 1e5

        for t in range(start):
            record_thr(t)
        record_thr(start)

        for t in range(start, config.horizon - 1):
            lag_t = t - config.lag_p
            rate = config.alpha[j] + shocks[t]
            if lag_t >= 0:
                if cov_names:
                    rate += float(x[lag_t] @ psi_vec)
                rate += config.kappa * (thr[lag_t] > config.tau)
            if rate < 0.0:
                clamped_days += 1
                rate = 0.0
            step = -config.gamma * rate * i_stock
            new_share = math.exp(log_surv) * (-math.expm1(step))
            log_surv += step
            dc_true[t + 1] = new_share
            i_stock = (1.0 - config.gamma) * i_stock + new_share
            record_thr(t + 1)

        series.append(
            RegionSeries(
                region_id=ids[j],
                population=pop,
                dates=dates.copy(),
                reported_new=reported,
            )
        )
        alpha_truth[ids[j]] = float(config.alpha[j])
        if cov_names:
            cov_rows.append(
                pd.DataFrame(
                    {
                        "region_id": ids[j],
                        "date": np.datetime_as_string(dates, unit="D"),
                        **{name: x[:, k] for k, name in enumerate(cov_names)},
                    }
                )
            )

    covariates = (
        pd.concat(cov_rows, ignore_index=True)
        if cov_rows
        else pd.DataFrame(columns=["region_id", "date"])
    )
    truth = {
        "alpha": alpha_truth,
        "psi": dict(config.psi),
        "kappa": float(config.kappa),
        "tau": float(config.tau),
        "gamma": float(config.gamma),
        "lag_p": int(config.lag_p),
        "noise_sd": float(config.noise_sd),
        "mf_start": config.mf_start,
        "mf_end": config.mf_end,
        "smoothing": bool(config.smoothing),
        "seed": int(config.seed),
        "clamped_days": int(clamped_days),
        "covariate_names": cov_names,
    }
    return SimOutput(series=series, covariates=covariates, truth=truth)


def demo_config(
    n_regions: int = 6,
    horizon: int = 160,
    seed: int = 0,
    noise_sd: float = 0.0,
    mf: tuple[float, float] | None = None,
    kappa: float = -1.5,
    tau: float = 0.4,
    smoothing: bool = False,
) -> SimConfig:
    """A small two-covariate configuration used by tests and the CLI default."""
    return SimConfig(
        n_regions=n_regions,
        horizon=horizon,
        alpha=[3.0 + 0.15 * j for j in range(n_regions)],
        psi={"stringency": -1.2, "econ_support": -0.4},
        kappa=kappa,
        tau=tau,
        covariates=[
            CovariateProcess(name="stringency", base=0.55, amplitude=0.25, period=140.0),
            CovariateProcess(name="econ_support", base=0.45, amplitude=0.20, period=200.0),
        ],
        noise_sd=noise_sd,
        mf_start=None if mf is None else mf[0],
        mf_end=None if mf is None else mf[1],
        seed_cases=20.0,
        population=1e7,
        smoothing=smoothing,
        seed=seed,
    )


@dataclass
class MomentCheckResult:
    """Mean absolute one-step deviation per population size, with the
    log-log slope of deviation against population."""

    table: pd.DataFrame
    slope: float
    params: dict

    def passed(self, lo: float = -1.3, hi: float = -0.7) -> bool:
        return lo <= self.slope <= hi


def moment_check(
    populations: tuple[int, ...] = (1_000, 10_000, 100_000),
    horizon: int = 60,
    r0: float = 2.5,
    gamma: float = GAMMA_DEFAULT,
    initial_share: float = 1e-3,
    reps: int = 3,
    seed: int = 0,
) -> MomentCheckResult:
    """Quantify the survival-ratio approximation error at finite population.

    Runs an integer-population epidemic where each susceptible escapes each
    active case with probability ``1 - beta/n`` per day, so the exact
    conditional mean of the day-ahead susceptible ratio is
    ``(1 - beta/n)^(n i)``.  The deviation of that mean from the
    approximation ``exp(-beta i)`` is averaged along the path; its log-log
    slope against ``n`` should be close to -1.

    Returns
    -------
    MomentCheckResult
        Per-population mean deviations and the fitted slope.
    """
    if len(populations) < 2:
        raise ValueError("need at least two population sizes to fit a slope")
    if any(n <= r0 / gamma for n in populations):
        raise ValueError("populations must exceed the daily contact number")
    beta = gamma * r0
    mean_devs = []
    for n in populations:
        per_rep = []
        for rep in range(reps):
            rng = np.random.default_rng(seed + 1000 * rep)
            cases = max(1, round(n * initial_share))
            i_share = cases / n
            devs = []
            for _ in range(horizon):
                susceptible = n - cases
                if susceptible <= 0 or i_share <= 0:
                    break
                log_escape = n * i_share * math.log1p(-beta / n)
                exact_mean = math.exp(log_escape)
                devs.append(abs(exact_mean - math.exp(-beta * i_share)))
                p_infect = -math.expm1(log_escape)
                new_cases = rng.binomial(susceptible, p_infect)
                cases += new_cases
                i_share = (1.0 - gamma) * i_share + new_cases / n
            per_rep.append(float(np.mean(devs)))
        mean_devs.append(float(np.mean(per_rep)))
    table = pd.DataFrame({"population": list(populations), "mean_abs_dev": mean_devs})
    slope = float(np.polyfit(np.log(np.asarray(populations, float)), np.log(mean_devs), 1)[0])
    return MomentCheckResult(
        table=table,
        slope=slope,
        params={
            "horizon": horizon,
            "r0": r0,
            "gamma": gamma,
            "initial_share": initial_share,
            "reps": reps,
            "seed": seed,
        },
    )
