"""Reproduction-number estimation from reported-incidence panels.

The package turns daily reported case counts into a fixed-effects panel
threshold regression whose region intercepts estimate the basic
reproduction number, with under-reporting correction, three standard-error
flavors, a synthetic-data generator for validation, and a file-based CLI.
"""

__version__ = "0.1.0"

from .compare import DiffReport, ToleranceSpec, compare, reference_table
from .config import ConfigError, RunConfig, config_from_dict, load_config
from .epi import (
    GAMMA_DEFAULT,
    EpiFrame,
    MFSchedule,
    RegionSeries,
    active_infections,
    adjust_and_accumulate,
    build_epi_frame,
    build_mf_schedule,
    mf_for_region,
    seven_day_ma,
    transmission_lhs,
)
from .ingest import (
    CONTIGUOUS_STATES,
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
from .inference import (
    CovarianceReport,
    covariance_report,
    default_truncation_lag,
    driscoll_kraay_cov,
    driscoll_kraay_se,
    newey_west_cov,
    newey_west_se,
    usual_cov,
    usual_se,
)
from .panel import (
    LAG_P_DEFAULT,
    PanelData,
    ThresholdFitResult,
    build_panel,
    counterfactual_fit,
    default_tau_grid,
    fit_fixed_effects,
    panel_from_csv,
    panel_to_csv,
    profile_threshold_search,
)
from .pipeline import (
    EstimateArtifacts,
    LoadedInputs,
    build_frames,
    load_inputs,
    prepare_panel,
    run_estimate,
    run_ingest,
    run_report,
    run_simulate,
)
from .simulate import (
    CovariateProcess,
    MomentCheckResult,
    SimConfig,
    SimOutput,
    demo_config,
    moment_check,
    simulate_panel,
)

__all__ = [
    "CONTIGUOUS_STATES",
    "GAMMA_DEFAULT",
    "LAG_P_DEFAULT",
    "ConfigError",
    "CovarianceReport",
    "CovariateProcess",
    "CovariateTable",
    "DiffReport",
    "EpiFrame",
    "EstimateArtifacts",
    "IngestIssue",
    "LoadedInputs",
    "MFSchedule",
    "MomentCheckResult",
    "PanelData",
    "RegionSeries",
    "RunConfig",
    "SimConfig",
    "SimOutput",
    "ThresholdFitResult",
    "ToleranceSpec",
    "active_infections",
    "adjust_and_accumulate",
    "build_epi_frame",
    "build_frames",
    "build_mf_schedule",
    "build_panel",
    "compare",
    "config_from_dict",
    "counterfactual_fit",
    "covariance_report",
    "default_mappings",
    "default_tau_grid",
    "default_truncation_lag",
    "demo_config",
    "driscoll_kraay_cov",
    "driscoll_kraay_se",
    "fit_fixed_effects",
    "governor_table",
    "load_config",
    "load_inputs",
    "merge_covariates",
    "mf_for_region",
    "moment_check",
    "newey_west_cov",
    "newey_west_se",
    "panel_from_csv",
    "panel_to_csv",
    "parse_cdc_states",
    "parse_owid",
    "parse_oxcgrt",
    "parse_vaccinations",
    "parse_variants",
    "prepare_panel",
    "profile_threshold_search",
    "read_cases_csv",
    "read_covariates_csv",
    "reference_table",
    "run_estimate",
    "run_ingest",
    "run_report",
    "run_simulate",
    "seven_day_ma",
    "simulate_panel",
    "state_populations",
    "transmission_lhs",
    "usual_cov",
    "usual_se",
    "write_cases_csv",
    "write_covariates_csv",
    "write_issues_jsonl",
]
