"""Run configuration: YAML scenarios, validation, CLI overrides.

A run is described by one YAML document.  Exactly one of ``data`` (paths to
input files) or ``simulation`` (generator settings) may be present; every
estimation output embeds the fully resolved configuration so results are
reproducible from their own metadata.
"""

from __future__ import annotations

import importlib.resources as resources
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml

from .epi import GAMMA_DEFAULT
from .panel import LAG_P_DEFAULT
from .simulate import CovariateProcess, SimConfig


class ConfigError(ValueError):
    """A configuration problem the user must fix (exit code 2)."""


BUNDLED_SCENARIOS = {
    "prevax_mf5_2": "prevax_mf5_2.yaml",
    "prevax_mf8_25": "prevax_mf8_25.yaml",
    "full_mf5_2": "full_mf5_2.yaml",
    "full_mf8_25": "full_mf8_25.yaml",
    "demo_sim": "demo_sim.yaml",
}

_DATA_KINDS = ("sources", "canonical", "panel")


@dataclass
class RunConfig:
    """Validated settings for one estimation, simulation, or ingest run."""

    label: str = "run"
    geography: str = "generic"  # us | country | generic; picks source parsers
    window: tuple[str, str] | None = None
    mf_start: float = 5.0
    mf_end: float = 2.0
    mf_alignment: str = "first_case"
    gamma: float = GAMMA_DEFAULT
    lag_p: int = LAG_P_DEFAULT
    smoothing: bool = True
    smooth_then_scale: bool = True
    threshold_from_adjusted: bool = False
    covariates: list[str] = field(default_factory=list)
    interactions: dict[str, tuple[str, str]] = field(default_factory=dict)
    tau_grid: dict | None = None
    weak_tol: float = 1e-3
    truncation_lag: int | None = None
    regions: list[str] | None = None
    data: dict | None = None
    simulation: dict | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.data is not None and self.simulation is not None:
            raise ConfigError("config must not set both 'data' and 'simulation'")
        if self.geography not in ("us", "country", "generic"):
            raise ConfigError(f"geography must be us, country, or generic, got {self.geography!r}")
        if self.mf_alignment not in ("first_case", "calendar"):
            raise ConfigError(f"mf.alignment must be first_case or calendar, got {self.mf_alignment!r}")
        for name, value in (("mf.start", self.mf_start), ("mf.end", self.mf_end)):
            if value < 1.0:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if not (0.0 < self.gamma <= 1.0):
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.lag_p < 0:
            raise ConfigError(f"lag_p must be non-negative, got {self.lag_p}")
        if self.truncation_lag is not None and self.truncation_lag < 0:
            raise ConfigError(f"truncation_lag must be non-negative, got {self.truncation_lag}")
        if self.window is not None:
            start, end = self.window
            if str(end) < str(start):
                raise ConfigError(f"window.end {end} precedes window.start {start}")
        if self.data is not None:
            kind = self.data.get("kind")
            if kind not in _DATA_KINDS:
                raise ConfigError(f"data.kind must be one of {_DATA_KINDS}, got {kind!r}")
        for name, pair in self.interactions.items():
            if len(pair) != 2:
                raise ConfigError(f"interactions.{name} must name exactly two columns")
        if self.tau_grid is not None:
            has_values = "values" in self.tau_grid
            has_range = {"lo", "hi", "step"} <= set(self.tau_grid)
            if not (has_values or has_range):
                raise ConfigError("tau_grid needs either 'values' or 'lo'+'hi'+'step'")

    def tau_grid_values(self) -> np.ndarray | None:
        """Explicit grid from the config, or None for the data-driven default."""
        if self.tau_grid is None:
            return None
        if "values" in self.tau_grid:
            return np.asarray(self.tau_grid["values"], dtype=float)
        lo, hi, step = (float(self.tau_grid[k]) for k in ("lo", "hi", "step"))
        if step <= 0 or hi < lo:
            raise ConfigError(f"invalid tau_grid range lo={lo} hi={hi} step={step}")
        n = int(round((hi - lo) / step))
        return np.round(lo + step * np.arange(n + 1), 10)

    def sim_config(self) -> SimConfig:
        if self.simulation is None:
            raise ConfigError("this command needs a 'simulation' section in the config")
        return sim_config_from_dict(self.simulation, seed=self.seed, gamma=self.gamma, lag_p=self.lag_p)

    def resolved(self) -> dict:
        """Plain dict of every effective setting, for embedding in outputs."""
        return {
            "label": self.label,
            "geography": self.geography,
            "window": list(self.window) if self.window else None,
            "mf": {"start": self.mf_start, "end": self.mf_end, "alignment": self.mf_alignment},
            "gamma": self.gamma,
            "lag_p": self.lag_p,
            "smoothing": self.smoothing,
            "smooth_then_scale": self.smooth_then_scale,
            "threshold_from_adjusted": self.threshold_from_adjusted,
            "covariates": list(self.covariates),
            "interactions": {k: list(v) for k, v in self.interactions.items()},
            "tau_grid": self.tau_grid,
            "weak_tol": self.weak_tol,
            "truncation_lag": self.truncation_lag,
            "regions": list(self.regions) if self.regions else None,
            "data": dict(self.data) if self.data else None,
            "simulation": dict(self.simulation) if self.simulation else None,
            "seed": self.seed,
        }


def _get(d: dict, key: str, default=None):
    value = d.get(key, default)
    return default if value is None else value


def config_from_dict(doc: dict) -> RunConfig:
    """Build and validate a RunConfig from a parsed YAML document."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    known = {
        "label", "geography", "window", "mf", "gamma", "lag_p", "smoothing",
        "smooth_then_scale", "threshold_from_adjusted", "covariates",
        "interactions", "tau_grid", "weak_tol", "truncation_lag", "regions",
        "data", "simulation", "seed",
    }
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    window = None
    if doc.get("window") is not None:
        w = doc["window"]
        if not isinstance(w, dict) or "start" not in w or "end" not in w:
            raise ConfigError("window must be a mapping with 'start' and 'end'")
        window = (str(w["start"]), str(w["end"]))

    mf = doc.get("mf") or {}
    if not isinstance(mf, dict):
        raise ConfigError("mf must be a mapping with 'start' and 'end'")

    interactions = {}
    for name, pair in (doc.get("interactions") or {}).items():
        interactions[str(name)] = tuple(str(c) for c in pair)

    cfg = RunConfig(
        label=str(_get(doc, "label", "run")),
        geography=str(_get(doc, "geography", "generic")),
        window=window,
        mf_start=float(_get(mf, "start", 5.0)),
        mf_end=float(_get(mf, "end", 2.0)),
        mf_alignment=str(_get(mf, "alignment", "first_case")),
        gamma=float(_get(doc, "gamma", GAMMA_DEFAULT)),
        lag_p=int(_get(doc, "lag_p", LAG_P_DEFAULT)),
        smoothing=bool(_get(doc, "smoothing", True)),
        smooth_then_scale=bool(_get(doc, "smooth_then_scale", True)),
        threshold_from_adjusted=bool(_get(doc, "threshold_from_adjusted", False)),
        covariates=[str(c) for c in (doc.get("covariates") or [])],
        interactions=interactions,
        tau_grid=doc.get("tau_grid"),
        weak_tol=float(_get(doc, "weak_tol", 1e-3)),
        truncation_lag=(None if doc.get("truncation_lag") is None else int(doc["truncation_lag"])),
        regions=(None if doc.get("regions") is None else [str(r) for r in doc["regions"]]),
        data=doc.get("data"),
        simulation=doc.get("simulation"),
        seed=int(_get(doc, "seed", 0)),
    )
    cfg.validate()
    return cfg


def load_config(path_or_name: str) -> RunConfig:
    """Load a config from a YAML file path or a bundled scenario name."""
    if path_or_name in BUNDLED_SCENARIOS:
        text = (
            resources.files("r0panel.refdata")
            .joinpath(f"scenarios/{BUNDLED_SCENARIOS[path_or_name]}")
            .read_text()
        )
    else:
        try:
            with open(path_or_name) as fh:
                text = fh.read()
        except FileNotFoundError:
            raise ConfigError(
                f"config {path_or_name!r} is neither a readable file nor a bundled scenario "
                f"({', '.join(sorted(BUNDLED_SCENARIOS))})"
            ) from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path_or_name!r} is not valid YAML: {exc}") from None
    return config_from_dict(doc)


def sim_config_from_dict(sim: dict, seed: int, gamma: float, lag_p: int) -> SimConfig:
    """Translate the YAML ``simulation`` section into generator settings."""
    if not isinstance(sim, dict):
        raise ConfigError("simulation must be a mapping")
    try:
        n_regions = int(sim["n_regions"])
        horizon = int(sim["horizon"])
    except KeyError as exc:
        raise ConfigError(f"simulation is missing required key {exc.args[0]!r}") from None

    alpha: Any = sim.get("alpha")
    if alpha is None:
        raise ConfigError("simulation.alpha is required (list, or mapping with base/step)")
    if isinstance(alpha, dict):
        base = float(_get(alpha, "base", 3.0))
        step = float(_get(alpha, "step", 0.0))
        alpha_list = [base + step * j for j in range(n_regions)]
    else:
        alpha_list = [float(a) for a in alpha]

    processes = []
    for entry in sim.get("covariates") or []:
        entry = dict(entry)
        if "name" not in entry:
            raise ConfigError("every simulation covariate needs a 'name'")
        processes.append(
            CovariateProcess(
                name=str(entry["name"]),
                base=float(_get(entry, "base", 0.5)),
                amplitude=float(_get(entry, "amplitude", 0.25)),
                period=float(_get(entry, "period", 180.0)),
                ar_rho=float(_get(entry, "ar_rho", 0.9)),
                ar_sd=float(_get(entry, "ar_sd", 0.05)),
                lo=float(_get(entry, "lo", 0.0)),
                hi=float(_get(entry, "hi", 1.0)),
            )
        )

    mf = sim.get("mf")
    mf_start = mf_end = None
    if mf is not None:
        if not isinstance(mf, dict) or not {"start", "end"} <= set(mf):
            raise ConfigError("simulation.mf needs both 'start' and 'end'")
        mf_start = float(mf["start"])
        mf_end = float(mf["end"])

    try:
        return SimConfig(
            n_regions=n_regions,
            horizon=horizon,
            alpha=alpha_list,
            psi={str(k): float(v) for k, v in (sim.get("psi") or {}).items()},
            kappa=float(_get(sim, "kappa", 0.0)),
            tau=float(_get(sim, "tau", 0.4)),
            lag_p=int(_get(sim, "lag_p", lag_p)),
            gamma=float(_get(sim, "gamma", gamma)),
            covariates=processes,
            noise_sd=float(_get(sim, "noise_sd", 0.0)),
            mf_start=mf_start,
            mf_end=mf_end,
            population=_get(sim, "population", 1e7),
            seed_cases=float(_get(sim, "seed_cases", 10.0)),
            start_offsets=sim.get("start_offsets"),
            start_date=str(_get(sim, "start_date", "2020-03-01")),
            smoothing=bool(_get(sim, "smoothing", False)),
            seed=int(_get(sim, "seed", seed)),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid simulation settings: {exc}") from None
