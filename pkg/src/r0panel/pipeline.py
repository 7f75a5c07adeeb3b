"""File-based runs: ingest, estimate, counterfactual, simulate, report.

Each command reads a :class:`~r0panel.config.RunConfig`, writes a small
bundle of plain files into an output directory, and is deterministic: the
same config and inputs produce byte-identical outputs (no timestamps, no
environment-dependent content).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import __version__
from .config import ConfigError, RunConfig
from .epi import EpiFrame, RegionSeries, build_epi_frame, mf_for_region
from .ingest import (
    CovariateTable,
    IngestIssue,
    default_mappings,
    governor_table,
    merge_covariates,
    parse_cdc_states,
    parse_owid,
    parse_oxcgrt,
    parse_vaccinations,
    parse_variants,
    read_cases_csv,
    read_covariates_csv,
    state_populations,
    write_cases_csv,
    write_covariates_csv,
    write_issues_jsonl,
)
from .inference import CovarianceReport, covariance_report
from .panel import (
    PanelData,
    ThresholdFitResult,
    build_panel,
    counterfactual_fit,
    panel_from_csv,
    panel_to_csv,
    profile_threshold_search,
)
from .simulate import simulate_panel

logger = logging.getLogger(__name__)

_DAY = np.timedelta64(1, "D")


@dataclass
class LoadedInputs:
    """Case series and covariates after parsing, before panel assembly."""

    series: list[RegionSeries]
    covariates: pd.DataFrame | None
    issues: list[IngestIssue] = field(default_factory=list)


@dataclass
class EstimateArtifacts:
    """Everything one estimation run produced, with the output paths."""

    panel: PanelData
    fit: ThresholdFitResult
    report: CovarianceReport
    paths: dict[str, Path]


def _jsonify(obj):
    """Make an object JSON-safe: numpy scalars to Python, NaN to null."""
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):  # before int: bool subclasses int
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return None if math.isnan(value) else value
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def _write_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(_jsonify(payload), indent=2, sort_keys=True, allow_nan=False) + "\n")


def _data_path(data: dict, key: str, purpose: str) -> Path:
    raw = data.get(key)
    if raw is None:
        raise ConfigError(f"data.{key} is required {purpose}")
    path = Path(raw)
    if not path.exists():
        raise ConfigError(f"data.{key} file not found: {path}")
    return path


def _needed_covariates(cfg: RunConfig) -> list[str]:
    """Covariate-table columns the run needs, regression order first."""
    names = list(cfg.covariates)
    for pair in cfg.interactions.values():
        names.extend(pair)
    return list(dict.fromkeys(names))


def _conform_series(series: RegionSeries, end: np.datetime64) -> RegionSeries | None:
    """Crop a series at ``end``; extend short series with unobserved zeros.

    Extension days carry ``observed=False`` so downstream rows that would
    need them as the day-ahead outcome are dropped rather than treated as
    true zero-case days; the uniform end date keeps the reporting-decline
    schedule anchored to the sample end in every region.
    """
    if series.dates[0] > end:
        return None
    if series.dates[-1] == end:
        return series
    if series.dates[-1] > end:
        keep = series.dates <= end
        return RegionSeries(
            region_id=series.region_id,
            population=series.population,
            dates=series.dates[keep],
            reported_new=series.reported_new[keep],
            observed=series.observed[keep],
        )
    extra = int((end - series.dates[-1]) / _DAY)
    pad_dates = series.dates[-1] + (1 + np.arange(extra))
    return RegionSeries(
        region_id=series.region_id,
        population=series.population,
        dates=np.concatenate([series.dates, pad_dates]),
        reported_new=np.concatenate([series.reported_new, np.zeros(extra)]),
        observed=np.concatenate([series.observed, np.zeros(extra, dtype=bool)]),
    )


def _broadcast_table(frame: pd.DataFrame, regions: list[str]) -> pd.DataFrame:
    """Replicate a single-region covariate grid to every panel region."""
    sources = frame["region_id"].unique()
    if len(sources) != 1:
        raise ValueError(f"cannot broadcast a table with regions {sorted(sources)}")
    parts = [frame.assign(region_id=region) for region in regions]
    return pd.concat(parts, ignore_index=True)


def _load_source_inputs(cfg: RunConfig) -> LoadedInputs:
    data = cfg.data
    issues: list[IngestIssue] = []
    mappings = None
    if data.get("mappings"):
        with open(_data_path(data, "mappings", "to override column mappings")) as fh:
            mappings = yaml.safe_load(fh)

    def section(name: str) -> dict | None:
        doc = mappings if mappings is not None else default_mappings()
        return doc.get(name)

    needed = _needed_covariates(cfg)
    vax_table: CovariateTable | None = None

    if cfg.geography == "us":
        populations = state_populations(data.get("populations"))
        series, case_issues = parse_cdc_states(
            _data_path(data, "cases", "for source ingestion"),
            mapping=section("cdc"),
            regions=cfg.regions,
            populations=populations,
        )
    elif cfg.geography == "country":
        series, vax_table, case_issues = parse_owid(
            _data_path(data, "cases", "for source ingestion"),
            mapping=section("owid"),
            regions=cfg.regions,
        )
        populations = {s.region_id: s.population for s in series}
    else:
        raise ConfigError("data.kind 'sources' needs geography 'us' or 'country'")
    issues.extend(case_issues)
    if not series:
        raise ValueError("no case series survived parsing")

    region_ids = [s.region_id for s in series]
    start = min(s.dates[0] for s in series)
    end = np.datetime64(cfg.window[1]) if cfg.window else max(s.dates[-1] for s in series)
    cov_window = (str(start), str(end))

    tables: list[CovariateTable] = []
    if {"stringency", "econ_support"} & set(needed):
        policy_section = "oxcgrt_us" if cfg.geography == "us" else "oxcgrt"
        table, iss = parse_oxcgrt(
            _data_path(data, "policy", "for the policy covariates"),
            mapping=section(policy_section),
            regions=region_ids,
        )
        tables.append(table)
        issues.extend(iss)
    if "delta_share" in needed:
        national = data.get("variants_region", "United States" if cfg.geography == "us" else None)
        table, iss = parse_variants(
            _data_path(data, "variants", "for the variant-share covariate"),
            mapping=section("variants"),
            regions=[national] if national else region_ids,
            window=cov_window,
        )
        issues.extend(iss)
        frame = table.frame
        if national:
            frame = _broadcast_table(frame, region_ids)
        tables.append(CovariateTable(frame=frame))
    if "vaccinated" in needed:
        if cfg.geography == "country":
            tables.append(vax_table)
        else:
            table, iss = parse_vaccinations(
                _data_path(data, "vaccinations", "for the vaccination covariate"),
                mapping=section("vaccinations"),
                regions=region_ids,
                window=cov_window,
                populations=populations,
            )
            tables.append(table)
            issues.extend(iss)
    if "rep_governor" in needed:
        tables.append(governor_table(data.get("governors"), window=cov_window))

    unsourced = set(needed) - {"stringency", "econ_support", "delta_share", "vaccinated", "rep_governor"}
    if unsourced:
        raise ConfigError(
            f"no source parser for covariates {sorted(unsourced)}; "
            "provide them via canonical 'covariates' data instead"
        )

    covariates = merge_covariates(tables).frame if tables else None
    return LoadedInputs(series=series, covariates=covariates, issues=issues)


def load_inputs(cfg: RunConfig) -> LoadedInputs:
    """Parse the configured inputs into case series plus a covariate table."""
    if cfg.data is None:
        raise ConfigError("this command needs a 'data' section in the config")
    kind = cfg.data["kind"]
    if kind == "panel":
        raise ConfigError("data.kind 'panel' skips ingestion; use it with estimate only")

    if kind == "canonical":
        series, issues = read_cases_csv(_data_path(cfg.data, "cases", "for canonical ingestion"))
        covariates = None
        if cfg.data.get("covariates"):
            covariates = read_covariates_csv(
                _data_path(cfg.data, "covariates", "for canonical covariates")
            ).frame
        if cfg.regions is not None:
            wanted = set(cfg.regions)
            series = [s for s in series if s.region_id in wanted]
            if covariates is not None:
                covariates = covariates[covariates["region_id"].isin(wanted)].reset_index(drop=True)
        loaded = LoadedInputs(series=series, covariates=covariates, issues=issues)
    else:
        loaded = _load_source_inputs(cfg)

    if cfg.window is not None:
        end = np.datetime64(cfg.window[1])
        conformed = []
        for s in loaded.series:
            made = _conform_series(s, end)
            if made is None:
                loaded.issues.append(
                    IngestIssue(
                        source="pipeline",
                        kind="outside_window",
                        detail=f"{s.region_id}: series starts after {cfg.window[1]}",
                    )
                )
            else:
                conformed.append(made)
        loaded.series = conformed
    if not loaded.series:
        raise ValueError("no case series available after windowing")
    return loaded


def build_frames(cfg: RunConfig, series: list[RegionSeries]) -> list[EpiFrame]:
    """Per-region transformation from reported counts to regression inputs."""
    frames = []
    for s in series:
        mf = mf_for_region(s, cfg.mf_start, cfg.mf_end, align=cfg.mf_alignment)
        frames.append(
            build_epi_frame(
                s,
                mf,
                gamma=cfg.gamma,
                smoothing=cfg.smoothing,
                smooth_then_scale=cfg.smooth_then_scale,
                threshold_from_adjusted=cfg.threshold_from_adjusted,
            )
        )
    return frames


def prepare_panel(cfg: RunConfig) -> tuple[PanelData, list[IngestIssue]]:
    """Produce the estimation panel for a config, whatever the data kind."""
    if cfg.data is None:
        raise ConfigError("this command needs a 'data' section in the config")
    if cfg.data["kind"] == "panel":
        panel = panel_from_csv(
            _data_path(cfg.data, "panel", "for a prebuilt panel"), lag_p=cfg.lag_p, gamma=cfg.gamma
        )
        if cfg.regions is not None:
            frame = panel.frame[panel.frame["region_id"].isin(set(cfg.regions))]
            if frame.empty:
                raise ValueError("region filter removed every panel row")
            panel = PanelData(
                frame=frame.reset_index(drop=True),
                x_names=panel.x_names,
                lag_p=panel.lag_p,
                gamma=panel.gamma,
            )
        return panel, []

    loaded = load_inputs(cfg)
    frames = build_frames(cfg, loaded.series)
    panel = build_panel(
        frames,
        loaded.covariates,
        cfg.covariates,
        lag_p=cfg.lag_p,
        window=cfg.window,
        extra_interactions=cfg.interactions,
    )
    return panel, loaded.issues


def _panel_issues(panel: PanelData) -> list[IngestIssue]:
    return [
        IngestIssue(source="panel", kind="dropped_rows", detail=w) for w in panel.warnings
    ]


def run_ingest(cfg: RunConfig, out_dir) -> dict[str, Path]:
    """Parse sources and write the canonical tables plus the built panel."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    loaded = load_inputs(cfg)
    frames = build_frames(cfg, loaded.series)
    panel = build_panel(
        frames,
        loaded.covariates,
        cfg.covariates,
        lag_p=cfg.lag_p,
        window=cfg.window,
        extra_interactions=cfg.interactions,
    )

    paths = {
        "cases": out / "cases.csv",
        "panel": out / "panel.csv",
        "warnings": out / "warnings.jsonl",
    }
    write_cases_csv(loaded.series, paths["cases"])
    if loaded.covariates is not None:
        paths["covariates"] = out / "covariates.csv"
        write_covariates_csv(CovariateTable(frame=loaded.covariates), paths["covariates"])
    panel_to_csv(panel, paths["panel"])
    write_issues_jsonl(loaded.issues + _panel_issues(panel), paths["warnings"])
    logger.info(
        "ingested %d regions, %d panel rows, %d warnings",
        len(loaded.series), panel.n_obs, len(loaded.issues) + len(panel.warnings),
    )
    return paths


def run_estimate(cfg: RunConfig, out_dir, counterfactual: bool = False) -> EstimateArtifacts:
    """Fit the panel model and write the four-file results bundle."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    panel, issues = prepare_panel(cfg)

    if counterfactual:
        fit = counterfactual_fit(panel)
    else:
        fit = profile_threshold_search(panel, tau_grid=cfg.tau_grid_values(), weak_tol=cfg.weak_tol)
    report = covariance_report(panel, fit, lag=cfg.truncation_lag)

    table = report.to_frame()
    is_alpha = table["name"].str.startswith("alpha:")
    r0 = table[is_alpha].copy()
    r0.insert(0, "region_id", r0.pop("name").str.removeprefix("alpha:"))
    r0 = r0[["region_id", "estimate", "se_usual", "se_robust1", "se_robust2"]]
    coef = table[~is_alpha].reset_index(drop=True)

    paths = {
        "panel": out / "panel.csv",
        "r0_table": out / "r0_table.csv",
        "coefficients": out / "coefficients.csv",
        "fit_meta": out / "fit_meta.json",
    }
    panel_to_csv(panel, paths["panel"])
    r0.to_csv(paths["r0_table"], index=False, lineterminator="\n")
    coef.to_csv(paths["coefficients"], index=False, lineterminator="\n")

    meta = {
        "model": fit.model,
        "tau": fit.tau,
        "kappa": fit.kappa,
        "kappa_identified": fit.kappa_identified,
        "weak_threshold": fit.weak_threshold,
        "r_squared": fit.r_squared,
        "ssr": fit.ssr,
        "obs_count": fit.obs_count,
        "region_count": fit.region_count,
        "t_min": fit.t_min,
        "t_max": fit.t_max,
        "truncation_lag": report.lag,
        "tau_grid_size": None if fit.tau_grid is None else int(len(fit.tau_grid)),
        "x_names": fit.design_names,
        "panel_warnings": list(panel.warnings),
        "ingest_issue_count": len(issues),
        "config": cfg.resolved(),
        "version": __version__,
    }
    _write_json(meta, paths["fit_meta"])
    logger.info(
        "fit %s: %d obs, %d regions, tau=%s, r2=%.4f",
        fit.model, fit.obs_count, fit.region_count, fit.tau, fit.r_squared,
    )
    return EstimateArtifacts(panel=panel, fit=fit, report=report, paths=paths)


def run_simulate(cfg: RunConfig, out_dir) -> dict[str, Path]:
    """Generate a synthetic panel and write it in the canonical formats."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sim = cfg.sim_config()
    result = simulate_panel(sim)
    paths = {
        "cases": out / "cases.csv",
        "covariates": out / "covariates.csv",
        "truth": out / "truth.json",
    }
    write_cases_csv(result.series, paths["cases"])
    write_covariates_csv(CovariateTable(frame=result.covariates), paths["covariates"])
    _write_json(result.truth, paths["truth"])
    logger.info("simulated %d regions over %d days", sim.n_regions, sim.horizon)
    return paths


def _load_estimate_table(path: Path) -> pd.DataFrame:
    target = path / "r0_table.csv" if path.is_dir() else path
    if not target.exists():
        raise ConfigError(f"no estimate table at {target}")
    df = pd.read_csv(target, dtype={"region_id": str})
    if not {"region_id", "estimate"} <= set(df.columns):
        raise ConfigError(f"{target} lacks the region_id/estimate columns")
    label = path.name if path.is_dir() else path.stem
    return df[["region_id", "estimate"]].assign(source=label)


def run_report(inputs: list, out_dir) -> tuple[str, dict[str, Path]]:
    """Summarize one or more estimate tables: histogram, ranking, summary."""
    if not inputs:
        raise ConfigError("report needs at least one estimate table or bundle directory")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    tables = [_load_estimate_table(Path(p)) for p in inputs]
    pooled = pd.concat(tables, ignore_index=True)
    n_raw = len(pooled)
    pooled = pooled.dropna(subset=["estimate"]).reset_index(drop=True)
    if pooled.empty:
        raise ValueError("no usable estimates in the given tables")
    values = pooled["estimate"].to_numpy(dtype=float)

    lo = math.floor(values.min() / 0.1 + 1e-9)
    hi = math.ceil(values.max() / 0.1 - 1e-9)
    if hi <= lo:
        hi = lo + 1
    edges = np.round(0.1 * np.arange(lo, hi + 1), 10)
    counts, _ = np.histogram(values, bins=edges)
    histogram = pd.DataFrame(
        {"bin_left": edges[:-1], "bin_right": edges[1:], "count": counts}
    )

    ranked = pooled.sort_values(
        ["estimate", "region_id", "source"], ascending=[False, True, True]
    ).reset_index(drop=True)
    ranked.insert(0, "rank", np.arange(1, len(ranked) + 1))
    top = values.max()
    ranked["bar"] = [
        "#" * max(1, int(round(40 * v / top))) if top > 0 else "" for v in ranked["estimate"]
    ]
    ranked = ranked[["rank", "source", "region_id", "estimate", "bar"]]

    mean = float(values.mean())
    summary_lines = [
        f"estimates: {len(values)}",
        f"dropped_missing: {n_raw - len(values)}",
        f"mean: {mean:.6f}",
        f"median: {float(np.median(values)):.6f}",
        f"min: {values.min():.6f}",
        f"max: {values.max():.6f}",
    ]

    paths = {
        "histogram": out / "histogram.csv",
        "ranking": out / "r0_sorted.csv",
        "summary": out / "summary.txt",
    }
    histogram.to_csv(paths["histogram"], index=False, lineterminator="\n")
    ranked.to_csv(paths["ranking"], index=False, lineterminator="\n")
    paths["summary"].write_text("\n".join(summary_lines) + "\n")

    line = f"mean R0 across {len(values)} estimates: {mean:.4f}"
    return line, paths
