"""Comparison-harness tests plus internal-consistency audits of the bundled
reference tables.

The t-ratio audit uses interval arithmetic: published estimates and standard
errors are rounded to two decimals and t-ratios to one, so the implied-t
interval from the rounded inputs must overlap the rounded t's own interval.
"""

import numpy as np
import pandas as pd
import pytest

from r0panel import DiffReport, ToleranceSpec, compare, reference_table

SAMPLES = ["prevax_mf5_2", "prevax_mf8_25", "full_mf5_2", "full_mf8_25"]


class TestToleranceSpec:
    def test_exact_mode_when_no_tolerances(self):
        spec = ToleranceSpec()
        assert spec.within(1.0, 1.0)
        assert not spec.within(1.0, 1.0 + 1e-12)

    def test_absolute_edge_inclusive(self):
        # binary-exact boundary: 1.5 - 1.0 is exactly 0.5
        spec = ToleranceSpec(abs_tol=0.5)
        assert spec.within(1.5, 1.0)
        assert not spec.within(1.5 + 1e-9, 1.0)

    def test_relative_edge_and_zero_reference(self):
        spec = ToleranceSpec(rel_tol=0.25)
        assert spec.within(1.25, 1.0)
        assert not spec.within(1.26, 1.0)
        assert spec.within(0.0, 0.0)
        assert not spec.within(1e-12, 0.0)  # no relative scale at zero

    def test_both_tolerances_must_hold(self):
        spec = ToleranceSpec(abs_tol=1.0, rel_tol=0.01)
        assert not spec.within(1.5, 1.0)  # abs ok, rel violated
        spec2 = ToleranceSpec(abs_tol=0.1, rel_tol=10.0)
        assert not spec2.within(1.5, 1.0)  # rel ok, abs violated

    def test_nan_never_within(self):
        spec = ToleranceSpec(abs_tol=1e9)
        assert not spec.within(float("nan"), 1.0)
        assert not spec.within(1.0, float("nan"))


class TestCompare:
    def test_self_comparison_passes_with_zero_deviation(self):
        table = reference_table("us_r0")
        report = compare(
            table, table, ToleranceSpec(), value_col="prevax_mf5_2", label="self"
        )
        assert report.passed
        assert report.n_compared == 48
        assert report.max_abs_dev == 0.0
        assert not report.missing_in_result and not report.missing_in_reference

    def test_missing_reference_key_fails(self):
        result = {"A": 1.0}
        reference = {"A": 1.0, "B": 2.0}
        report = compare(result, reference, ToleranceSpec(abs_tol=1.0))
        assert not report.passed
        assert report.missing_in_result == ["B"]

    def test_extra_result_keys_reported_but_not_fatal(self):
        result = {"A": 1.0, "C": 3.0}
        reference = {"A": 1.0}
        report = compare(result, reference, ToleranceSpec(abs_tol=0.1))
        assert report.passed
        assert report.missing_in_reference == ["C"]

    def test_min_fraction_within(self):
        result = {"A": 1.0, "B": 2.5, "C": 3.0, "D": 4.0}
        reference = {"A": 1.0, "B": 2.0, "C": 3.0, "D": 4.0}
        tight = compare(result, reference, ToleranceSpec(abs_tol=0.1))
        assert not tight.passed and tight.n_within == 3
        loose = compare(
            result, reference, ToleranceSpec(abs_tol=0.1, min_fraction_within=0.75)
        )
        assert loose.passed and loose.fraction_within == 0.75

    def test_dataframe_and_dict_inputs_mix(self):
        frame = pd.DataFrame({"region_id": ["A", "B"], "estimate": [1.0, 2.0]})
        report = compare(frame, {"A": 1.0, "B": 2.05}, ToleranceSpec(abs_tol=0.1))
        assert report.passed

    def test_reference_value_column_override(self):
        result = pd.DataFrame({"region_id": ["A"], "estimate": [4.0]})
        reference = pd.DataFrame({"region_id": ["A"], "prevax_mf5_2": [4.02]})
        report = compare(
            result,
            reference,
            ToleranceSpec(abs_tol=0.3),
            reference_value_col="prevax_mf5_2",
        )
        assert report.passed and report.rows.loc[0, "reference"] == 4.02

    def test_text_rendering_marks_failures(self):
        report = compare(
            {"A": 1.0, "B": 9.0}, {"A": 1.0, "B": 2.0}, ToleranceSpec(abs_tol=0.5)
        )
        text = report.to_text()
        assert "FAIL" in text and "NO" in text
        ok = compare({"A": 1.0}, {"A": 1.2}, ToleranceSpec(abs_tol=0.5))
        assert "PASS" in ok.to_text()

    def test_json_rendering_round_trips(self):
        import json

        report = compare({"A": 1.0}, {"A": 1.1}, ToleranceSpec(abs_tol=0.2))
        payload = json.loads(report.to_json())
        assert payload["passed"] is True
        assert payload["rows"][0]["key"] == "A"

    def test_unknown_reference_name_rejected(self):
        with pytest.raises(ValueError, match="unknown reference table"):
            reference_table("nonexistent")

    def test_unsupported_type_rejected(self):
        with pytest.raises(TypeError, match="DataFrame or dict"):
            compare([1, 2], {"A": 1.0}, ToleranceSpec())


class TestReferenceTables:
    def test_row_counts_and_columns(self):
        expected_rows = {
            "us_r0": 48,
            "country_r0": 19,
            "us_r0_nomitigation": 47,
            "country_r0_nomitigation": 18,
            "panel_dimensions": 4,
        }
        for name, n_rows in expected_rows.items():
            table = reference_table(name)
            assert len(table) == n_rows, name
        for name in ("us_r0", "country_r0", "us_r0_nomitigation", "country_r0_nomitigation"):
            table = reference_table(name)
            assert list(table.columns[:1]) == ["region_id"]
            for sample in SAMPLES:
                assert sample in table.columns and f"{sample}_se" in table.columns

    def test_spot_values(self):
        us = reference_table("us_r0").set_index("region_id")
        assert us.loc["Rhode Island", "prevax_mf5_2"] == 4.88
        assert us.loc["Oklahoma", "prevax_mf5_2"] == 4.21
        countries = reference_table("country_r0").set_index("region_id")
        assert countries.loc["Argentina", "prevax_mf5_2"] == 5.01
        assert countries.loc["South Korea", "prevax_mf5_2"] == 3.85
        assert 4.4 <= us["prevax_mf5_2"].mean() <= 5.0

    def test_panel_dimensions(self):
        dims = reference_table("panel_dimensions").set_index(["geography", "sample"])
        assert dims.loc[("us", "prevax"), "observations"] == 14996
        assert dims.loc[("us", "full"), "observations"] == 29531
        assert dims.loc[("country", "prevax"), "observations"] == 5928
        assert dims.loc[("country", "full"), "observations"] == 11661
        assert dims.loc[("us", "prevax"), "regions"] == 48
        assert dims.loc[("country", "prevax"), "regions"] == 19
        assert (dims["t_max"] >= dims["t_min"]).all()

    def test_mitigated_baselines_exceed_bare_intercepts(self):
        # the bare-intercept fits absorb mitigation into the mean and must sit
        # far below the full-model baselines for every shared region; the two
        # US tables cover slightly different region sets, hence 46 not 48
        for geo, n_shared in (("us", 46), ("country", 18)):
            full = reference_table(f"{geo}_r0").set_index("region_id")
            bare = reference_table(f"{geo}_r0_nomitigation").set_index("region_id")
            shared = bare.index.intersection(full.index)
            assert len(shared) == n_shared
            for sample in SAMPLES:
                assert (bare.loc[shared, sample] < full.loc[shared, sample]).all()

    @pytest.mark.parametrize("name", ["us_coefficients", "country_coefficients"])
    def test_coefficient_t_ratios_consistent_under_rounding(self, name):
        table = reference_table(name)
        stats = set(table["stat"])
        assert "estimate" in stats
        by_coef = {c: g.set_index("stat") for c, g in table.groupby("coefficient")}
        checked = 0
        for coef, block in by_coef.items():
            for flavor in ("usual", "robust1", "robust2"):
                se_row, t_row = f"se_{flavor}", f"t_{flavor}"
                if se_row not in block.index or t_row not in block.index:
                    continue
                for sample in SAMPLES:
                    est = block.loc["estimate", sample]
                    se = block.loc[se_row, sample]
                    t = block.loc[t_row, sample]
                    if np.isnan(est) or np.isnan(se) or np.isnan(t):
                        continue
                    # estimates/SEs rounded to 2 decimals, t to 1: the
                    # implied-t interval must overlap the printed-t interval
                    est_lo, est_hi = est - 0.005, est + 0.005
                    se_lo, se_hi = max(se - 0.005, 1e-9), se + 0.005
                    bounds = [
                        est_lo / se_lo, est_lo / se_hi, est_hi / se_lo, est_hi / se_hi
                    ]
                    implied = (min(bounds), max(bounds))
                    printed = (t - 0.05, t + 0.05)
                    assert implied[0] <= printed[1] and printed[0] <= implied[1], (
                        name, coef, flavor, sample, est, se, t, implied
                    )
                    checked += 1
        assert checked >= 36  # every flavor of every coefficient, all samples
