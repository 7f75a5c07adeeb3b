"""Parsers from public source files to canonical per-region daily tables.

Each parser maps one source vintage (country epidemiology, US state case
surveillance, policy indices, variant shares, governor party) onto two
canonical shapes:

- case series: one :class:`~r0panel.epi.RegionSeries` per region on a
  contiguous daily index, interior reporting gaps zero-filled and flagged
  through the ``observed`` mask;
- covariate tables: a long frame keyed by (``region_id``, ``date``) with
  one column per covariate, values already on their model scale
  (policy indices divided by 100, shares within [0, 1]).

Source column names, date formats, and region-code translations live in a
mapping file (``refdata/source_columns.yaml``), not in code, so a new
vintage is a config change.  Structural problems (missing columns,
duplicate keys) raise; row-level problems (malformed dates, negative
corrections, unknown regions) are returned as :class:`IngestIssue` records
so a run can report exactly what it skipped.
"""

from __future__ import annotations

import importlib.resources as resources
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import yaml

from .epi import RegionSeries

_DAY = np.timedelta64(1, "D")

#: The contiguous-US filter: 48 states plus the District of Columbia.
CONTIGUOUS_STATES = [
    "Alabama", "Arizona", "Arkansas", "California", "Colorado", "Connecticut",
    "Delaware", "District of Columbia", "Florida", "Georgia", "Idaho",
    "Illinois", "Indiana", "Iowa", "Kansas", "Kentucky", "Louisiana", "Maine",
    "Maryland", "Massachusetts", "Michigan", "Minnesota", "Mississippi",
    "Missouri", "Montana", "Nebraska", "Nevada", "New Hampshire", "New Jersey",
    "New Mexico", "New York", "North Carolina", "North Dakota", "Ohio",
    "Oklahoma", "Oregon", "Pennsylvania", "Rhode Island", "South Carolina",
    "South Dakota", "Tennessee", "Texas", "Utah", "Vermont", "Virginia",
    "Washington", "West Virginia", "Wisconsin", "Wyoming",
]


@dataclass(frozen=True)
class IngestIssue:
    """One row- or region-level problem encountered while parsing."""

    source: str
    kind: str
    detail: str
    line: int | None = None

    def as_dict(self) -> dict:
        return {"source": self.source, "kind": self.kind, "detail": self.detail, "line": self.line}


@dataclass
class CovariateTable:
    """Aligned per-region daily covariates keyed by (region_id, date)."""

    frame: pd.DataFrame
    issues: list[IngestIssue] = field(default_factory=list)

    def __post_init__(self):
        for col in ("region_id", "date"):
            if col not in self.frame.columns:
                raise ValueError(f"covariate table is missing the {col} column")
        if self.frame.duplicated(["region_id", "date"]).any():
            dup = self.frame[self.frame.duplicated(["region_id", "date"])].iloc[0]
            raise ValueError(f"duplicate key ({dup['region_id']}, {dup['date']}) in covariate table")
        self.frame = self.frame.sort_values(["region_id", "date"], kind="mergesort").reset_index(drop=True)

    @property
    def value_columns(self) -> list[str]:
        return [c for c in self.frame.columns if c not in ("region_id", "date")]

    def merge(self, other: "CovariateTable") -> "CovariateTable":
        overlap = set(self.value_columns) & set(other.value_columns)
        if overlap:
            raise ValueError(f"covariate columns defined twice: {sorted(overlap)}")
        merged = self.frame.merge(other.frame, on=["region_id", "date"], how="outer")
        return CovariateTable(frame=merged, issues=self.issues + other.issues)


def merge_covariates(tables: list[CovariateTable]) -> CovariateTable:
    """Outer-join covariate tables on (region_id, date)."""
    if not tables:
        raise ValueError("need at least one covariate table")
    merged = tables[0]
    for table in tables[1:]:
        merged = merged.merge(table)
    return merged


def default_mappings() -> dict:
    """Bundled source column mappings (one section per source)."""
    text = resources.files("r0panel.refdata").joinpath("source_columns.yaml").read_text()
    return yaml.safe_load(text)


def _mapping_for(source: str, mapping: dict | None) -> dict:
    resolved = mapping if mapping is not None else default_mappings().get(source)
    if not resolved:
        raise ValueError(f"no column mapping available for source {source!r}")
    if "columns" not in resolved:
        raise ValueError(f"mapping for {source!r} must contain a 'columns' section")
    return resolved


def _require_columns(df: pd.DataFrame, wanted: dict[str, str], source: str) -> None:
    missing = sorted({v for v in wanted.values() if v not in df.columns})
    if missing:
        raise ValueError(f"{source} file is missing mapped columns {missing}")


def _parse_date_column(
    df: pd.DataFrame, col: str, date_format: str, source: str, issues: list[IngestIssue]
) -> pd.Series:
    """ISO date strings per row; malformed rows become NaN and one issue each."""
    parsed = pd.to_datetime(df[col], format=date_format, errors="coerce")
    bad = parsed.isna() & df[col].notna()
    for idx in df.index[bad]:
        issues.append(
            IngestIssue(
                source=source,
                kind="bad_date",
                detail=f"unparseable date {df.loc[idx, col]!r}",
                line=int(idx) + 2,  # header is line 1
            )
        )
    return parsed.dt.strftime("%Y-%m-%d")


def _window_bounds(window) -> tuple[np.datetime64, np.datetime64] | None:
    if window is None:
        return None
    start = np.datetime64(pd.Timestamp(window[0]).date(), "D")
    end = np.datetime64(pd.Timestamp(window[1]).date(), "D")
    if end < start:
        raise ValueError(f"window end {end} precedes start {start}")
    return start, end


def _series_from_records(
    region_id: str,
    population: float,
    recs: pd.DataFrame,
    window: tuple[np.datetime64, np.datetime64] | None,
    source: str,
    issues: list[IngestIssue],
) -> RegionSeries | None:
    """Contiguous daily series from (date, new_cases) records for one region.

    The span is the requested window when given, else the region's own
    record range.  Days before the region's first record count as true
    zeros; days after it that lack a record are gaps: zero-filled with
    ``observed=False`` and reported as one summary issue.
    """
    recs = recs.dropna(subset=["date"])
    if recs.duplicated("date").any():
        dup_date = recs.loc[recs.duplicated("date"), "date"].iloc[0]
        raise ValueError(f"duplicate key ({region_id}, {dup_date}) in {source}")
    counts = pd.to_numeric(recs["new_cases"], errors="coerce")
    dates = recs["date"].to_numpy(dtype="datetime64[D]")

    neg = counts < 0
    if neg.any():
        issues.append(
            IngestIssue(
                source=source,
                kind="negative_count",
                detail=f"{region_id}: floored {int(neg.sum())} negative daily counts at 0",
            )
        )
        counts = counts.clip(lower=0)

    valid = counts.notna().to_numpy()
    if window is not None:
        start, end = window
        inside = (dates >= start) & (dates <= end)
        valid &= inside
    if not valid.any():
        issues.append(IngestIssue(source=source, kind="no_data", detail=f"{region_id}: no usable rows"))
        return None
    dates_v = dates[valid]
    counts_v = counts.to_numpy(dtype=float)[valid]

    span_start = window[0] if window is not None else dates_v.min()
    span_end = window[1] if window is not None else dates_v.max()
    n_days = int((span_end - span_start) / _DAY) + 1
    full = np.zeros(n_days)
    observed = np.zeros(n_days, dtype=bool)
    offsets = ((dates_v - span_start) / _DAY).astype(int)
    full[offsets] = counts_v
    observed[offsets] = True

    first = offsets.min()
    observed[:first] = True  # pre-first-report days are true zeros, not gaps
    gaps = int((~observed).sum())
    if gaps:
        issues.append(
            IngestIssue(
                source=source,
                kind="gap_filled",
                detail=f"{region_id}: zero-filled {gaps} unreported days after first report",
            )
        )
    return RegionSeries(
        region_id=region_id,
        population=population,
        dates=span_start + np.arange(n_days),
        reported_new=full,
        observed=observed,
    )


def _step_hold_daily(
    recs: pd.DataFrame,
    value_col: str,
    window: tuple[np.datetime64, np.datetime64],
    interpolation: str = "step",
) -> pd.DataFrame:
    """Expand sparse (date, value) records to a daily grid over ``window``.

    Values hold from each record to the day before the next one (or are
    linearly interpolated between records); days before the first record
    are 0.
    """
    start, end = window
    grid = start + np.arange(int((end - start) / _DAY) + 1)
    rec_dates = recs["date"].to_numpy(dtype="datetime64[D]")
    order = np.argsort(rec_dates, kind="stable")
    rec_dates = rec_dates[order]
    values = recs[value_col].to_numpy(dtype=float)[order]
    if interpolation == "linear" and len(rec_dates) > 1:
        xp = (rec_dates - start) / _DAY
        x = (grid - start) / _DAY
        daily = np.interp(x, xp, values, left=0.0, right=values[-1])
        before = grid < rec_dates[0]
        daily[before] = 0.0
    else:
        idx = np.searchsorted(rec_dates, grid, side="right") - 1
        daily = np.where(idx >= 0, values[np.clip(idx, 0, None)], 0.0)
    return pd.DataFrame({"date": np.datetime_as_string(grid, unit="D"), "value": daily})


def parse_owid(
    path,
    mapping: dict | None = None,
    regions: list[str] | None = None,
    window=None,
) -> tuple[list[RegionSeries], CovariateTable, list[IngestIssue]]:
    """Country case series plus a step-held vaccinated-share covariate.

    The vaccination metric is cumulative and sparsely reported, so it is
    held constant between reports and is 0 before the first one.  The
    mapping's ``vaccinated_unit`` chooses how to scale it: ``count``
    (divide by population), ``per_hundred``, or ``share``.
    """
    spec = _mapping_for("owid", mapping)
    cols = spec["columns"]
    issues: list[IngestIssue] = []
    df = pd.read_csv(path)
    needed = {k: cols[k] for k in ("region", "date", "new_cases", "population")}
    _require_columns(df, needed, "owid")
    df = df.rename(columns={v: k for k, v in cols.items() if v in df.columns})
    df["date"] = _parse_date_column(df, "date", spec.get("date_format", "%Y-%m-%d"), "owid", issues)

    known = sorted(df["region"].dropna().unique())
    wanted = regions if regions is not None else known
    for region in wanted:
        if region not in known:
            issues.append(IngestIssue(source="owid", kind="unknown_region", detail=f"{region}: not present in file"))
    bounds = _window_bounds(window)

    series: list[RegionSeries] = []
    vax_rows: list[pd.DataFrame] = []
    vax_unit = spec.get("vaccinated_unit", "count")
    for region in wanted:
        chunk = df[df["region"] == region]
        if chunk.empty:
            continue
        pop_vals = pd.to_numeric(chunk["population"], errors="coerce").dropna()
        if pop_vals.empty:
            issues.append(IngestIssue(source="owid", kind="no_population", detail=f"{region}: population missing"))
            continue
        population = float(pop_vals.iloc[0])
        made = _series_from_records(region, population, chunk[["date", "new_cases"]], bounds, "owid", issues)
        if made is None:
            continue
        series.append(made)
        if "vaccinated" in chunk.columns:
            grid = bounds if bounds is not None else (made.dates[0], made.dates[-1])
            recs = chunk.dropna(subset=["date", "vaccinated"])[["date", "vaccinated"]]
            if not recs.empty:
                recs = recs.copy()
                recs["vaccinated"] = pd.to_numeric(recs["vaccinated"], errors="coerce")
                recs = recs.dropna(subset=["vaccinated"])
                scale = {"count": population, "per_hundred": 100.0, "share": 1.0}[vax_unit]
                recs["vaccinated"] = recs["vaccinated"] / scale
                daily = _step_hold_daily(recs, "vaccinated", grid)
                vax_rows.append(
                    pd.DataFrame(
                        {"region_id": region, "date": daily["date"], "vaccinated": daily["value"]}
                    )
                )
            else:
                vax_rows.append(_zero_covariate(region, grid, "vaccinated"))
    vax_frame = (
        pd.concat(vax_rows, ignore_index=True)
        if vax_rows
        else pd.DataFrame(columns=["region_id", "date", "vaccinated"])
    )
    return series, CovariateTable(frame=vax_frame), issues


def _zero_covariate(region: str, bounds, name: str) -> pd.DataFrame:
    start, end = bounds
    grid = start + np.arange(int((end - start) / _DAY) + 1)
    return pd.DataFrame(
        {"region_id": region, "date": np.datetime_as_string(grid, unit="D"), name: 0.0}
    )


def state_populations(path=None) -> dict[str, float]:
    """Bundled census resident populations for the contiguous states + DC."""
    if path is None:
        text = resources.files("r0panel.refdata").joinpath("state_population.csv").read_text()
        from io import StringIO

        df = pd.read_csv(StringIO(text))
    else:
        df = pd.read_csv(path)
    return {str(r.region_id): float(r.population) for r in df.itertuples()}


def parse_cdc_states(
    path,
    mapping: dict | None = None,
    regions: list[str] | None = None,
    window=None,
    populations: dict[str, float] | None = None,
) -> tuple[list[RegionSeries], list[IngestIssue]]:
    """US state case series with the contiguous-48 + DC filter built in.

    State codes are translated through the mapping's ``region_map``;
    ``merge_keys`` sums jurisdictions that split one state across several
    codes.  Negative daily revisions are floored at 0 and counted.
    """
    spec = _mapping_for("cdc", mapping)
    cols = spec["columns"]
    issues: list[IngestIssue] = []
    df = pd.read_csv(path)
    _require_columns(df, cols, "cdc")
    df = df.rename(columns={v: k for k, v in cols.items() if v in df.columns})
    df["date"] = _parse_date_column(df, "date", spec.get("date_format", "%m/%d/%Y"), "cdc", issues)

    region_map = dict(spec.get("region_map", {}))
    for merged_name, codes in dict(spec.get("merge_keys", {})).items():
        for code in codes:
            region_map[code] = merged_name
    df["region_id"] = df["region"].map(region_map)
    unknown = df.loc[df["region_id"].isna(), "region"].dropna().unique()
    for code in sorted(unknown):
        issues.append(IngestIssue(source="cdc", kind="unknown_region", detail=f"code {code!r} not in region_map"))
    df = df.dropna(subset=["region_id"])

    wanted = regions if regions is not None else CONTIGUOUS_STATES
    pops = populations if populations is not None else state_populations()
    bounds = _window_bounds(window)

    # jurisdictions merged into one region are summed per date
    df = df.groupby(["region_id", "date"], as_index=False)["new_cases"].sum(min_count=1)

    series: list[RegionSeries] = []
    for region in wanted:
        chunk = df[df["region_id"] == region]
        if chunk.empty:
            issues.append(IngestIssue(source="cdc", kind="no_data", detail=f"{region}: no rows"))
            continue
        if region not in pops:
            issues.append(IngestIssue(source="cdc", kind="no_population", detail=f"{region}: population unknown"))
            continue
        made = _series_from_records(
            region, pops[region], chunk.rename(columns={"region_id": "region"})[["date", "new_cases"]],
            bounds, "cdc", issues,
        )
        if made is not None:
            series.append(made)
    return series, issues


def parse_oxcgrt(
    path,
    mapping: dict | None = None,
    regions: list[str] | None = None,
    window=None,
) -> tuple[CovariateTable, list[IngestIssue]]:
    """Policy indices on the model scale (source 0-100 divided by 100)."""
    spec = _mapping_for("oxcgrt", mapping)
    cols = spec["columns"]
    issues: list[IngestIssue] = []
    df = pd.read_csv(path)
    _require_columns(df, cols, "oxcgrt")
    df = df.rename(columns={v: k for k, v in cols.items() if v in df.columns})
    jur_col = spec.get("jurisdiction_column")
    if jur_col and jur_col in df.columns:
        df = df[df[jur_col] == spec.get("jurisdiction_value", "NAT_TOTAL")]
    df["date"] = _parse_date_column(df, "date", spec.get("date_format", "%Y%m%d"), "oxcgrt", issues)
    df = df.dropna(subset=["date"])

    scale = float(spec.get("scale", 100.0))
    value_cols = [k for k in cols if k not in ("region", "date")]
    for col in value_cols:
        df[col] = pd.to_numeric(df[col], errors="coerce") / scale

    if regions is not None:
        known = set(df["region"].dropna().unique())
        for region in regions:
            if region not in known:
                issues.append(
                    IngestIssue(source="oxcgrt", kind="unknown_region", detail=f"{region}: not present in file")
                )
        df = df[df["region"].isin(regions)]
    bounds = _window_bounds(window)
    if bounds is not None:
        dates = df["date"].to_numpy(dtype="datetime64[D]")
        df = df[(dates >= bounds[0]) & (dates <= bounds[1])]

    out = df.rename(columns={"region": "region_id"})[["region_id", "date", *value_cols]]
    return CovariateTable(frame=out.reset_index(drop=True), issues=issues), issues


def parse_variants(
    path,
    mapping: dict | None = None,
    regions: list[str] | None = None,
    window=None,
    interpolation: str = "step",
    clamp_tol: float = 1e-6,
) -> tuple[CovariateTable, list[IngestIssue]]:
    """Daily variant share from sparse sequencing records.

    Records give either a share directly or (count, total) pairs.  Shares
    beyond [0, 1] by at most ``clamp_tol`` (default: numerical noise only)
    are clamped with a warning; larger excursions reject the row.  The
    sparse records are expanded to a daily grid (step-held by default,
    linear optional) and are 0 before the first record.
    """
    if window is None:
        raise ValueError("parse_variants requires a window to build the daily grid")
    spec = _mapping_for("variants", mapping)
    cols = spec["columns"]
    issues: list[IngestIssue] = []
    df = pd.read_csv(path)
    _require_columns(df, cols, "variants")
    df = df.rename(columns={v: k for k, v in cols.items() if v in df.columns})
    df["date"] = _parse_date_column(df, "date", spec.get("date_format", "%Y-%m-%d"), "variants", issues)
    df = df.dropna(subset=["date"])

    if "share" in df.columns:
        df["share"] = pd.to_numeric(df["share"], errors="coerce")
    else:
        if not {"variant_count", "total_count"} <= set(df.columns):
            raise ValueError("variants mapping must provide 'share' or 'variant_count'+'total_count'")
        counts = pd.to_numeric(df["variant_count"], errors="coerce")
        totals = pd.to_numeric(df["total_count"], errors="coerce")
        zero_total = totals <= 0
        for idx in df.index[zero_total.fillna(False)]:
            issues.append(
                IngestIssue(source="variants", kind="no_sequences", detail="total_count is 0", line=int(idx) + 2)
            )
        df["share"] = np.where(zero_total, np.nan, counts / totals)
    df = df.dropna(subset=["share"])

    out_of_range = (df["share"] < -clamp_tol) | (df["share"] > 1.0 + clamp_tol)
    for idx in df.index[out_of_range]:
        issues.append(
            IngestIssue(
                source="variants",
                kind="out_of_range",
                detail=f"share {df.loc[idx, 'share']:.4f} outside [0, 1]",
                line=int(idx) + 2,
            )
        )
    df = df[~out_of_range]
    clamped = (df["share"] < 0) | (df["share"] > 1)
    if clamped.any():
        issues.append(
            IngestIssue(
                source="variants",
                kind="clamped",
                detail=f"clamped {int(clamped.sum())} shares within {clamp_tol} of [0, 1]",
            )
        )
        df.loc[:, "share"] = df["share"].clip(0.0, 1.0)

    bounds = _window_bounds(window)
    known = sorted(df["region"].dropna().unique())
    wanted = regions if regions is not None else known
    rows: list[pd.DataFrame] = []
    for region in wanted:
        chunk = df[df["region"] == region]
        if chunk.empty:
            issues.append(IngestIssue(source="variants", kind="unknown_region", detail=f"{region}: no records"))
            rows.append(_zero_covariate(region, bounds, "delta_share"))
            continue
        daily = _step_hold_daily(chunk, "share", bounds, interpolation=interpolation)
        rows.append(
            pd.DataFrame({"region_id": region, "date": daily["date"], "delta_share": daily["value"]})
        )
    frame = (
        pd.concat(rows, ignore_index=True)
        if rows
        else pd.DataFrame(columns=["region_id", "date", "delta_share"])
    )
    return CovariateTable(frame=frame, issues=issues), issues


def parse_vaccinations(
    path,
    mapping: dict | None = None,
    regions: list[str] | None = None,
    window=None,
    populations: dict[str, float] | None = None,
) -> tuple[CovariateTable, list[IngestIssue]]:
    """Step-held daily vaccinated share from a cumulative-vaccination file.

    Companion to the vaccination column inside country case files, for
    sources that ship vaccination as its own table (for example one row per
    state and report date).  Values are scaled by the mapping's
    ``vaccinated_unit`` (``count`` needs ``populations``), held constant
    between reports, and 0 before the first report.
    """
    if window is None:
        raise ValueError("parse_vaccinations requires a window to build the daily grid")
    spec = _mapping_for("vaccinations", mapping)
    cols = spec["columns"]
    issues: list[IngestIssue] = []
    df = pd.read_csv(path)
    _require_columns(df, cols, "vaccinations")
    df = df.rename(columns={v: k for k, v in cols.items() if v in df.columns})
    df["date"] = _parse_date_column(df, "date", spec.get("date_format", "%Y-%m-%d"), "vaccinations", issues)
    df = df.dropna(subset=["date"])
    df["vaccinated"] = pd.to_numeric(df["vaccinated"], errors="coerce")
    df = df.dropna(subset=["vaccinated"])

    unit = spec.get("vaccinated_unit", "per_hundred")
    if unit not in ("count", "per_hundred", "share"):
        raise ValueError(f"vaccinated_unit must be count, per_hundred, or share, got {unit!r}")
    if unit == "count" and populations is None:
        raise ValueError("vaccinated_unit 'count' needs a populations mapping")

    bounds = _window_bounds(window)
    known = sorted(df["region"].dropna().unique())
    wanted = regions if regions is not None else known
    rows: list[pd.DataFrame] = []
    for region in wanted:
        chunk = df[df["region"] == region]
        if chunk.empty:
            issues.append(
                IngestIssue(source="vaccinations", kind="unknown_region", detail=f"{region}: no records")
            )
            rows.append(_zero_covariate(region, bounds, "vaccinated"))
            continue
        if unit == "count":
            if region not in populations:
                issues.append(
                    IngestIssue(source="vaccinations", kind="no_population", detail=f"{region}: population unknown")
                )
                rows.append(_zero_covariate(region, bounds, "vaccinated"))
                continue
            scale = populations[region]
        else:
            scale = 100.0 if unit == "per_hundred" else 1.0
        chunk = chunk.copy()
        chunk["vaccinated"] = chunk["vaccinated"] / scale
        daily = _step_hold_daily(chunk, "vaccinated", bounds)
        rows.append(
            pd.DataFrame({"region_id": region, "date": daily["date"], "vaccinated": daily["value"]})
        )
    frame = (
        pd.concat(rows, ignore_index=True)
        if rows
        else pd.DataFrame(columns=["region_id", "date", "vaccinated"])
    )
    return CovariateTable(frame=frame, issues=issues), issues


def governor_table(path=None, window=None) -> CovariateTable:
    """Daily 0/1 indicator for a Republican state executive.

    Reads the bundled service-period table (one row per region and party
    span) and expands it to a daily grid clipped to ``window``.
    """
    if path is None:
        text = resources.files("r0panel.refdata").joinpath("governors.csv").read_text()
        from io import StringIO

        periods = pd.read_csv(StringIO(text))
    else:
        periods = pd.read_csv(path)
    needed = {"region_id", "party", "start_date", "end_date"}
    if not needed <= set(periods.columns):
        raise ValueError(f"governor table must have columns {sorted(needed)}")

    rows: list[pd.DataFrame] = []
    for rec in periods.itertuples():
        start = np.datetime64(rec.start_date, "D")
        end = np.datetime64(rec.end_date, "D")
        if window is not None:
            bounds = _window_bounds(window)
            start = max(start, bounds[0])
            end = min(end, bounds[1])
        if end < start:
            continue
        grid = start + np.arange(int((end - start) / _DAY) + 1)
        rows.append(
            pd.DataFrame(
                {
                    "region_id": rec.region_id,
                    "date": np.datetime_as_string(grid, unit="D"),
                    "rep_governor": 1.0 if rec.party == "R" else 0.0,
                }
            )
        )
    frame = pd.concat(rows, ignore_index=True)
    return CovariateTable(frame=frame)


# --- canonical intermediate formats -------------------------------------

CASES_COLUMNS = ["region_id", "date", "new_cases", "population"]


def write_cases_csv(series: list[RegionSeries], path) -> None:
    """Write case series to the canonical long table (one row per day)."""
    parts = [
        pd.DataFrame(
            {
                "region_id": s.region_id,
                "date": np.datetime_as_string(s.dates, unit="D"),
                "new_cases": s.reported_new,
                "population": s.population,
            }
        )
        for s in series
    ]
    table = pd.concat(parts, ignore_index=True)
    table.to_csv(path, index=False, lineterminator="\n")


def read_cases_csv(path, window=None) -> tuple[list[RegionSeries], list[IngestIssue]]:
    """Read the canonical case table back into per-region series."""
    df = pd.read_csv(
        path, dtype={"region_id": str, "date": str}, float_precision="round_trip"
    )
    missing = [c for c in CASES_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"cases file is missing columns {missing}")
    issues: list[IngestIssue] = []
    bounds = _window_bounds(window)
    series: list[RegionSeries] = []
    for region, chunk in df.groupby("region_id", sort=True):
        pops = chunk["population"].astype(float).unique()
        if len(pops) != 1:
            raise ValueError(f"population varies within region {region}")
        made = _series_from_records(
            str(region), float(pops[0]),
            chunk.rename(columns={"region_id": "region"})[["date", "new_cases"]],
            bounds, "cases", issues,
        )
        if made is not None:
            series.append(made)
    return series, issues


def write_covariates_csv(table: CovariateTable, path) -> None:
    table.frame.to_csv(path, index=False, lineterminator="\n")


def read_covariates_csv(path) -> CovariateTable:
    frame = pd.read_csv(
        path, dtype={"region_id": str, "date": str}, float_precision="round_trip"
    )
    return CovariateTable(frame=frame)


def write_issues_jsonl(issues: list[IngestIssue], path) -> None:
    """One JSON object per issue, in encounter order."""
    import json

    with open(path, "w") as fh:
        for issue in issues:
            fh.write(json.dumps(issue.as_dict(), sort_keys=True) + "\n")
