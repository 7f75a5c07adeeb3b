"""Command-line and configuration tests.

Most commands run in-process through ``main(argv)``; the cases that assert
on error text use a subprocess so the logging stream is captured cleanly.
"""

import json
import subprocess
import sys

import numpy as np
import pandas as pd
import pytest
import yaml

from r0panel import ConfigError, config_from_dict, load_config
from r0panel.cli import main

RUNNER = [
    sys.executable,
    "-c",
    "import sys; from r0panel.cli import main; sys.exit(main(sys.argv[1:]))",
]


def write_yaml(path, doc):
    path.write_text(yaml.safe_dump(doc, sort_keys=False))
    return str(path)


def demo_estimate_doc(sim_dir):
    """Estimation settings matching the demo scenario's generator."""
    return {
        "label": "demo_estimate",
        "mf": {"start": 5.0, "end": 2.0},
        "smoothing": False,
        "lag_p": 10,
        "covariates": ["stringency", "econ_support"],
        "data": {
            "kind": "canonical",
            "cases": str(sim_dir / "cases.csv"),
            "covariates": str(sim_dir / "covariates.csv"),
        },
    }


@pytest.fixture(scope="module")
def demo_bundle(tmp_path_factory):
    """One simulate + estimate chain shared by the read-only tests."""
    root = tmp_path_factory.mktemp("demo")
    sim_dir, est_dir = root / "sim", root / "est"
    assert main(["simulate", "--config", "demo_sim", "--out", str(sim_dir)]) == 0
    cfg_path = write_yaml(root / "estimate.yaml", demo_estimate_doc(sim_dir))
    assert main(["estimate", "--config", cfg_path, "--out", str(est_dir)]) == 0
    return root, sim_dir, est_dir, cfg_path


class TestEstimateBundle:
    def test_simulate_writes_canonical_fixture(self, demo_bundle):
        _, sim_dir, _, _ = demo_bundle
        for name in ("cases.csv", "covariates.csv", "truth.json"):
            assert (sim_dir / name).exists()
        truth = json.loads((sim_dir / "truth.json").read_text())
        assert truth["tau"] == 0.4
        assert truth["seed"] == 7  # scenario file's seed

    def test_estimate_writes_all_four_files(self, demo_bundle):
        _, _, est_dir, _ = demo_bundle
        for name in ("panel.csv", "r0_table.csv", "coefficients.csv", "fit_meta.json"):
            assert (est_dir / name).exists()

    def test_recovered_threshold_matches_generator_truth(self, demo_bundle):
        _, sim_dir, est_dir, _ = demo_bundle
        truth = json.loads((sim_dir / "truth.json").read_text())
        meta = json.loads((est_dir / "fit_meta.json").read_text())
        assert meta["tau"] == truth["tau"]
        assert meta["model"] == "threshold"
        assert meta["r_squared"] == pytest.approx(1.0, abs=1e-9)
        assert meta["kappa"] == pytest.approx(truth["kappa"], abs=1e-8)
        r0 = pd.read_csv(est_dir / "r0_table.csv").set_index("region_id")
        for region, value in truth["alpha"].items():
            assert r0.loc[region, "estimate"] == pytest.approx(value, abs=1e-8)

    def test_rerun_is_byte_identical(self, demo_bundle, tmp_path):
        root, _, est_dir, cfg_path = demo_bundle
        second = tmp_path / "est2"
        assert main(["estimate", "--config", cfg_path, "--out", str(second)]) == 0
        for name in ("panel.csv", "r0_table.csv", "coefficients.csv", "fit_meta.json"):
            assert (est_dir / name).read_bytes() == (second / name).read_bytes(), name

    def test_counterfactual_same_bundle_layout(self, demo_bundle, tmp_path):
        _, _, _, cfg_path = demo_bundle
        out = tmp_path / "cf"
        assert main(["counterfactual", "--config", cfg_path, "--out", str(out)]) == 0
        meta = json.loads((out / "fit_meta.json").read_text())
        assert meta["model"] == "intercept_only"
        assert meta["tau"] is None
        assert meta["kappa_identified"] is False
        assert (out / "r0_table.csv").exists()
        coef = pd.read_csv(out / "coefficients.csv")
        assert coef.empty

    def test_stdout_summary_line(self, demo_bundle, tmp_path, capsys):
        _, _, _, cfg_path = demo_bundle
        main(["estimate", "--config", cfg_path, "--out", str(tmp_path / "o")])
        out = capsys.readouterr().out
        assert "threshold:" in out and "tau=0.4000" in out and "r0_table.csv" in out


class TestOverrides:
    def test_mismatched_correction_changes_estimates(self, demo_bundle, tmp_path):
        _, _, est_dir, cfg_path = demo_bundle
        out = tmp_path / "wrong_mf"
        code = main(
            [
                "estimate", "--config", cfg_path, "--out", str(out),
                "--mf-start", "8.0", "--mf-end", "2.5",
            ]
        )
        assert code == 0
        meta = json.loads((out / "fit_meta.json").read_text())
        assert meta["config"]["mf"] == {"start": 8.0, "end": 2.5, "alignment": "first_case"}
        assert (out / "r0_table.csv").read_bytes() != (est_dir / "r0_table.csv").read_bytes()

    def test_tau_grid_range_form(self, demo_bundle, tmp_path):
        _, _, _, cfg_path = demo_bundle
        out = tmp_path / "grid"
        assert main(
            ["estimate", "--config", cfg_path, "--out", str(out), "--tau-grid", "0.2:0.6:0.1"]
        ) == 0
        meta = json.loads((out / "fit_meta.json").read_text())
        assert meta["tau_grid_size"] == 5
        assert meta["tau"] == 0.4

    def test_tau_grid_list_form(self, demo_bundle, tmp_path):
        _, _, _, cfg_path = demo_bundle
        out = tmp_path / "grid2"
        assert main(
            ["estimate", "--config", cfg_path, "--out", str(out), "--tau-grid", "0.35,0.4"]
        ) == 0
        meta = json.loads((out / "fit_meta.json").read_text())
        assert meta["tau_grid_size"] == 2 and meta["tau"] == 0.4

    def test_malformed_tau_grid_is_usage_error(self, demo_bundle, tmp_path):
        _, _, _, cfg_path = demo_bundle
        code = main(
            ["estimate", "--config", cfg_path, "--out", str(tmp_path / "x"), "--tau-grid", "a:b"]
        )
        assert code == 2

    def test_window_clips_panel(self, demo_bundle, tmp_path):
        _, _, _, cfg_path = demo_bundle
        out = tmp_path / "win"
        assert main(
            [
                "estimate", "--config", cfg_path, "--out", str(out),
                "--window", "2020-04-01:2020-06-30",
            ]
        ) == 0
        panel = pd.read_csv(out / "panel.csv")
        assert panel["date"].min() >= "2020-04-01"
        assert panel["date"].max() == "2020-06-29"  # end day only feeds the last y

    def test_lag_override_recorded_and_applied(self, demo_bundle, tmp_path):
        _, _, _, cfg_path = demo_bundle
        out = tmp_path / "lag"
        assert main(["estimate", "--config", cfg_path, "--out", str(out), "--lag", "0"]) == 0
        meta = json.loads((out / "fit_meta.json").read_text())
        assert meta["config"]["lag_p"] == 0

    def test_seed_flag_beats_scenario_seed(self, tmp_path):
        out = tmp_path / "sim9"
        assert main(["simulate", "--config", "demo_sim", "--out", str(out), "--seed", "9"]) == 0
        truth = json.loads((out / "truth.json").read_text())
        assert truth["seed"] == 9


class TestReportCommand:
    def test_report_over_two_bundles(self, demo_bundle, tmp_path, capsys):
        root, _, est_dir, cfg_path = demo_bundle
        second = tmp_path / "est_b"
        main(["estimate", "--config", cfg_path, "--out", str(second), "--mf-start", "8.0",
              "--mf-end", "2.5"])
        capsys.readouterr()
        out = tmp_path / "rep"
        code = main(["report", str(est_dir), str(second / "r0_table.csv"), "--out", str(out)])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "mean R0 across 12 estimates:" in stdout
        for name in ("histogram.csv", "r0_sorted.csv", "summary.txt"):
            assert (out / name).exists()
        ranked = pd.read_csv(out / "r0_sorted.csv")
        assert list(ranked.columns) == ["rank", "source", "region_id", "estimate", "bar"]
        assert ranked["estimate"].is_monotonic_decreasing
        hist = pd.read_csv(out / "histogram.csv")
        assert hist["count"].sum() == 12

    def test_report_missing_input_is_usage_error(self, tmp_path):
        assert main(["report", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 2


class TestExitCodes:
    def test_missing_data_path_exits_2_and_names_it(self, tmp_path):
        doc = demo_estimate_doc(tmp_path / "nowhere")
        cfg_path = write_yaml(tmp_path / "exp.yaml", doc)
        proc = subprocess.run(
            RUNNER + ["estimate", "--config", cfg_path, "--out", str(tmp_path / "o")],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 2
        assert str(tmp_path / "nowhere" / "cases.csv") in proc.stderr

    def test_unknown_scenario_exits_2_listing_choices(self, tmp_path):
        proc = subprocess.run(
            RUNNER + ["estimate", "--config", "no_such_scenario", "--out", str(tmp_path)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 2
        assert "demo_sim" in proc.stderr  # bundled choices are listed

    def test_invalid_setting_exits_2(self, tmp_path):
        cfg_path = write_yaml(tmp_path / "bad.yaml", {"gamma": 1.7})
        assert main(["estimate", "--config", cfg_path, "--out", str(tmp_path / "o")]) == 2

    def test_estimation_failure_exits_1(self, demo_bundle, tmp_path):
        # config names a covariate the table does not have: the run fails
        # after configuration parsing, so this is exit 1, not 2
        _, sim_dir, _, _ = demo_bundle
        doc = demo_estimate_doc(sim_dir)
        doc["covariates"] = ["not_a_column"]
        cfg_path = write_yaml(tmp_path / "bad_cov.yaml", doc)
        assert main(["estimate", "--config", cfg_path, "--out", str(tmp_path / "o")]) == 1

    def test_broken_yaml_exits_2(self, tmp_path):
        cfg_path = tmp_path / "broken.yaml"
        cfg_path.write_text("label: [unclosed\n")
        assert main(["estimate", "--config", str(cfg_path), "--out", str(tmp_path / "o")]) == 2


class TestConfigDict:
    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="mystery"):
            config_from_dict({"mystery": 1})

    def test_data_and_simulation_exclusive(self):
        with pytest.raises(ConfigError, match="both"):
            config_from_dict(
                {"data": {"kind": "canonical"}, "simulation": {"n_regions": 1, "horizon": 10}}
            )

    def test_window_order_checked(self):
        with pytest.raises(ConfigError, match="precedes"):
            config_from_dict({"window": {"start": "2020-06-01", "end": "2020-03-01"}})

    def test_correction_below_one_rejected(self):
        with pytest.raises(ConfigError, match="mf.start"):
            config_from_dict({"mf": {"start": 0.5, "end": 2.0}})

    def test_interaction_arity_checked(self):
        with pytest.raises(ConfigError, match="exactly two"):
            config_from_dict({"interactions": {"x": ["a"]}})

    def test_tau_grid_shape_checked(self):
        with pytest.raises(ConfigError, match="tau_grid"):
            config_from_dict({"tau_grid": {"lo": 0.1}})
        cfg = config_from_dict({"tau_grid": {"lo": 0.6, "hi": 0.2, "step": 0.1}})
        with pytest.raises(ConfigError, match="invalid tau_grid"):
            cfg.tau_grid_values()

    def test_tau_grid_values_forms(self):
        cfg = config_from_dict({"tau_grid": {"lo": 0.2, "hi": 0.6, "step": 0.1}})
        np.testing.assert_allclose(cfg.tau_grid_values(), [0.2, 0.3, 0.4, 0.5, 0.6])
        cfg2 = config_from_dict({"tau_grid": {"values": [0.4, 0.1]}})
        np.testing.assert_allclose(cfg2.tau_grid_values(), [0.4, 0.1])
        assert config_from_dict({}).tau_grid_values() is None

    def test_simulation_alpha_forms(self):
        doc = {"simulation": {"n_regions": 3, "horizon": 30, "alpha": {"base": 2.0, "step": 0.5}}}
        cfg = config_from_dict(doc)
        assert cfg.sim_config().alpha == [2.0, 2.5, 3.0]
        doc2 = {"simulation": {"n_regions": 2, "horizon": 30, "alpha": [4.0, 5.0]}}
        assert config_from_dict(doc2).sim_config().alpha == [4.0, 5.0]

    def test_simulation_mf_needs_both_ends(self):
        doc = {
            "simulation": {
                "n_regions": 2, "horizon": 30, "alpha": [4.0, 5.0], "mf": {"start": 5.0}
            }
        }
        with pytest.raises(ConfigError, match="both 'start' and 'end'"):
            config_from_dict(doc).sim_config()

    def test_simulation_rejects_bad_settings_as_config_errors(self):
        doc = {"simulation": {"n_regions": 2, "horizon": 30, "alpha": [4.0]}}
        with pytest.raises(ConfigError, match="alpha"):
            config_from_dict(doc).sim_config()

    def test_bundled_scenarios_all_load(self):
        for name in ("prevax_mf5_2", "prevax_mf8_25", "full_mf5_2", "full_mf8_25", "demo_sim"):
            cfg = load_config(name)
            if name == "demo_sim":
                assert cfg.label == name
                assert cfg.simulation is not None
            else:
                assert cfg.label == f"us_{name}"
                assert cfg.geography == "us"
                assert cfg.data is not None and cfg.data["kind"] == "sources"
                assert len(cfg.regions) == 48
