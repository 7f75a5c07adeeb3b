"""Field-by-field comparison of estimate tables against reference tables.

Comparisons are keyed (typically by region), report absolute and relative
deviations per key, list keys missing on either side, and aggregate to a
single pass/fail against an explicit tolerance.  A comparison of a table
with itself always passes with zero deviations.
"""

from __future__ import annotations

import importlib.resources as resources
import json
import math
from dataclasses import dataclass, field
from io import StringIO

import pandas as pd

_REFERENCE_FILES = {
    "us_r0": "us_r0_reference.csv",
    "country_r0": "country_r0_reference.csv",
    "us_r0_nomitigation": "us_r0_nomitigation_reference.csv",
    "country_r0_nomitigation": "country_r0_nomitigation_reference.csv",
    "us_coefficients": "us_coefficients_reference.csv",
    "country_coefficients": "country_coefficients_reference.csv",
    "panel_dimensions": "panel_dimensions_reference.csv",
}


def reference_table(name: str) -> pd.DataFrame:
    """Load a bundled reference table by logical name."""
    if name not in _REFERENCE_FILES:
        raise ValueError(f"unknown reference table {name!r}; choose from {sorted(_REFERENCE_FILES)}")
    text = resources.files("r0panel.refdata").joinpath(_REFERENCE_FILES[name]).read_text()
    return pd.read_csv(StringIO(text))


@dataclass(frozen=True)
class ToleranceSpec:
    """Pass rule for one comparison.

    A key is within tolerance when its absolute deviation is at most
    ``abs_tol`` and its relative deviation at most ``rel_tol`` (whichever
    are set; with neither set, values must match exactly).  The comparison
    passes when at least ``min_fraction_within`` of the shared keys are
    within tolerance and no reference key is missing from the results.
    """

    abs_tol: float | None = None
    rel_tol: float | None = None
    min_fraction_within: float = 1.0

    def within(self, result: float, reference: float) -> bool:
        if math.isnan(result) or math.isnan(reference):
            return False
        abs_dev = abs(result - reference)
        if self.abs_tol is None and self.rel_tol is None:
            return result == reference
        if self.abs_tol is not None and abs_dev > self.abs_tol:
            return False
        if self.rel_tol is not None:
            scale = abs(reference)
            if scale == 0.0:
                return abs_dev == 0.0
            if abs_dev / scale > self.rel_tol:
                return False
        return True


@dataclass
class DiffReport:
    """Outcome of one keyed comparison."""

    label: str
    rows: pd.DataFrame  # key, result, reference, abs_dev, rel_dev, within
    missing_in_result: list[str]
    missing_in_reference: list[str]
    tolerance: ToleranceSpec
    notes: list[str] = field(default_factory=list)

    @property
    def n_compared(self) -> int:
        return len(self.rows)

    @property
    def n_within(self) -> int:
        return int(self.rows["within"].sum()) if self.n_compared else 0

    @property
    def fraction_within(self) -> float:
        return self.n_within / self.n_compared if self.n_compared else 0.0

    @property
    def max_abs_dev(self) -> float:
        return float(self.rows["abs_dev"].max()) if self.n_compared else float("nan")

    @property
    def passed(self) -> bool:
        if self.missing_in_result:
            return False
        if self.n_compared == 0:
            return False
        return self.fraction_within >= self.tolerance.min_fraction_within

    def to_text(self) -> str:
        lines = [f"comparison: {self.label}"]
        width = max((len(str(k)) for k in self.rows["key"]), default=3)
        lines.append(f"{'key':<{width}}  {'result':>10}  {'reference':>10}  {'abs_dev':>9}  ok")
        for rec in self.rows.itertuples():
            lines.append(
                f"{rec.key:<{width}}  {rec.result:>10.4f}  {rec.reference:>10.4f}"
                f"  {rec.abs_dev:>9.4f}  {'yes' if rec.within else 'NO'}"
            )
        if self.missing_in_result:
            lines.append(f"missing in result: {', '.join(self.missing_in_result)}")
        if self.missing_in_reference:
            lines.append(f"missing in reference: {', '.join(self.missing_in_reference)}")
        lines.append(
            f"{self.n_within}/{self.n_compared} within tolerance"
            f" (abs_tol={self.tolerance.abs_tol}, rel_tol={self.tolerance.rel_tol})"
            f" -> {'PASS' if self.passed else 'FAIL'}"
        )
        return "\n".join(lines)

    def to_json(self) -> str:
        payload = {
            "label": self.label,
            "tolerance": {
                "abs_tol": self.tolerance.abs_tol,
                "rel_tol": self.tolerance.rel_tol,
                "min_fraction_within": self.tolerance.min_fraction_within,
            },
            "n_compared": self.n_compared,
            "n_within": self.n_within,
            "passed": self.passed,
            "missing_in_result": self.missing_in_result,
            "missing_in_reference": self.missing_in_reference,
            "rows": self.rows.to_dict(orient="records"),
            "notes": self.notes,
        }
        return json.dumps(payload, sort_keys=True, indent=2)


def _as_mapping(table, key_col: str, value_col: str) -> dict[str, float]:
    if isinstance(table, dict):
        return {str(k): float(v) for k, v in table.items()}
    if isinstance(table, pd.DataFrame):
        for col in (key_col, value_col):
            if col not in table.columns:
                raise ValueError(f"table is missing column {col!r}")
        sub = table.dropna(subset=[value_col])
        return {str(k): float(v) for k, v in zip(sub[key_col], sub[value_col])}
    raise TypeError(f"cannot compare a {type(table).__name__}; pass a DataFrame or dict")


def compare(
    result,
    reference,
    tolerance: ToleranceSpec,
    key_col: str = "region_id",
    value_col: str = "estimate",
    reference_value_col: str | None = None,
    label: str = "estimates vs reference",
) -> DiffReport:
    """Compare two keyed value tables under a tolerance rule.

    ``result`` and ``reference`` are DataFrames (``key_col``/value columns)
    or plain ``{key: value}`` mappings.  Keys present on only one side are
    reported, not silently dropped; missing reference keys in the result
    fail the comparison.
    """
    res_map = _as_mapping(result, key_col, value_col)
    ref_map = _as_mapping(reference, key_col, reference_value_col or value_col)

    shared = sorted(set(res_map) & set(ref_map))
    records = []
    for key in shared:
        r, f = res_map[key], ref_map[key]
        abs_dev = abs(r - f)
        rel_dev = abs_dev / abs(f) if f != 0 else (0.0 if abs_dev == 0 else math.inf)
        records.append(
            {
                "key": key,
                "result": r,
                "reference": f,
                "abs_dev": abs_dev,
                "rel_dev": rel_dev,
                "within": tolerance.within(r, f),
            }
        )
    rows = pd.DataFrame(records, columns=["key", "result", "reference", "abs_dev", "rel_dev", "within"])
    return DiffReport(
        label=label,
        rows=rows,
        missing_in_result=sorted(set(ref_map) - set(res_map)),
        missing_in_reference=sorted(set(res_map) - set(ref_map)),
        tolerance=tolerance,
    )
