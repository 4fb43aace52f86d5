"""End-to-end tests: sampler modes on the linear toy problem, run reports and the command line."""

import json
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest
import yaml

import main_sampler
from LisBuilder import LisBuilder
from MultilevelSampler import MultilevelSampler
from SamplerReportGenerator import SamplerReportGenerator
from conftest import attach_linear_data
from data_class.RunConfig import RunConfig
from data_class.RunStatus import RunStatus
from load_default_sampler_settings import load_default_sampler_settings, merge_settings
from lis_file import read_lis_file, write_lis_file
from main_sampler import EXIT_OK, EXIT_USAGE, main
from model_setup.linear_gaussian import LinearGaussianModel, build_linear_gaussian_models
from sampler_errors import ConfigError, DimensionError, UsageError


def linear_settings(tmp_path, **run):
    """A three-level linear-Gaussian run small enough for unit tests."""
    settings = {
        "hierarchy": {"num_levels": 3, "coarse_mesh_size": 0.5, "param_dim_base": 4, "param_dim_scale": 2},
        "model": {"kind": "linear_gaussian", "num_observations": 4, "operator_decay": 0.5, "operator_seed": 3},
        "data": {"data_file": str(tmp_path / "data" / "observations.json"), "snr": 5.0},
        "laplace": {"num_gnh_samples": 3, "covariance_samples": 200},
        "lis": {"lis_file": str(tmp_path / "data" / "lis_basis.bin")},
        "proposal": {"pcn_coefficient": 0.5, "adapt_interval": 20},
        "run": {"mode": "MLDILI", "num_samples": [300, 200, 150], "pilot_steps": 150, "workers": 2, **run},
        "output": {"output_dir": str(tmp_path / "runs")},
    }
    return merge_settings(load_default_sampler_settings(), settings)


def write_config(tmp_path, **run):
    path = tmp_path / "linear.yml"
    settings = linear_settings(tmp_path, **run)
    with open(path, "w") as f:
        yaml.safe_dump(settings, f)
    return str(path), settings


class BrokenModel(LinearGaussianModel):
    def solve_observe(self, v):
        raise ValueError("broken level")


@pytest.fixture
def lis_result(linear_models, tmp_path):
    config = RunConfig.from_settings(linear_settings(tmp_path))
    return LisBuilder(linear_models, config.build_hierarchy(), config.laplace, config.lis, workers=2).build()


class TestRunConfig:
    def test_defaults_are_valid(self):
        config = RunConfig.from_settings(load_default_sampler_settings())
        assert config.run.mode == "MLDILI"
        assert config.build_hierarchy().param_dim == (150, 250, 450, 850)

    def test_every_problem_is_reported(self, tmp_path):
        settings = linear_settings(tmp_path, mode="MCMC", burn_in_fraction=1.5)
        settings["proposal"]["time_step"] = -1.0
        settings["extras"] = {}
        with pytest.raises(ConfigError) as error:
            RunConfig.from_settings(settings)
        assert len(error.value.problems) == 4

    def test_merge_keeps_unmentioned_settings(self):
        merged = merge_settings({"run": {"mode": "pCN", "seed": 3}}, {"run": {"seed": 4}})
        assert merged == {"run": {"mode": "pCN", "seed": 4}}


class TestMultilevelSampler:
    def test_multilevel_dili_run(self, linear_models, lis_result, tmp_path):
        config = RunConfig.from_settings(linear_settings(tmp_path))
        sampler = MultilevelSampler(config, linear_models, lis_result)
        report = sampler.run()
        assert report.complete
        assert [stats.level for stats in report.levels] == [0, 1, 2]
        assert [stats.num_samples for stats in report.levels] == [300, 200, 150]
        assert report.estimate == pytest.approx(sum(stats.mean for stats in report.levels))
        assert report.status != RunStatus.FAIL
        assert not any(issue.issue_type == "coupling_violation" for issue in report.issues)
        assert report.levels[1].kernel == "coupled DILI"
        assert report.levels[0].kernel == "DILI"
        assert np.isfinite(report.estimator_variance)

    def test_mixed_mode_uses_dili_only_on_the_base_level(self, linear_models, lis_result, tmp_path):
        config = RunConfig.from_settings(linear_settings(tmp_path, mode="MLmixed"))
        report = MultilevelSampler(config, linear_models, lis_result).run()
        assert [stats.kernel for stats in report.levels] == ["DILI", "coupled pCN", "coupled pCN"]

    def test_single_level_mode_runs_the_finest_level(self, linear_models, tmp_path):
        config = RunConfig.from_settings(linear_settings(tmp_path, mode="pCN"))
        sampler = MultilevelSampler(config, linear_models)
        report = sampler.run()
        assert [stats.level for stats in report.levels] == [2]
        assert report.levels[0].num_samples == 300
        assert report.estimate == pytest.approx(report.levels[0].mean)

    def test_dili_modes_need_a_lis(self, linear_models, tmp_path):
        config = RunConfig.from_settings(linear_settings(tmp_path, mode="DILI"))
        with pytest.raises(UsageError):
            MultilevelSampler(config, linear_models).run()

    def test_lis_from_another_hierarchy_is_rejected(self, linear_models, tmp_path):
        other_settings = linear_settings(tmp_path)
        other_settings["hierarchy"]["param_dim_base"] = 5
        other = RunConfig.from_settings(other_settings)
        other_models = attach_linear_data(
            build_linear_gaussian_models(other.build_hierarchy(), num_observations=4, operator_decay=0.5, seed=3)
        )
        stale = LisBuilder(other_models, other.build_hierarchy(), other.laplace, other.lis).build()
        config = RunConfig.from_settings(linear_settings(tmp_path, mode="MLpCN"))
        with pytest.raises(UsageError, match="different hierarchy"):
            MultilevelSampler(config, linear_models, stale).run()

    def test_unconverged_map_from_a_lis_file_is_reported(self, linear_models, lis_result, tmp_path):
        references = [
            replace(reference, map_converged=reference.level != 0, gradient_norm=0.2)
            for reference in lis_result.references
        ]
        path = write_lis_file(replace(lis_result, references=references), tmp_path / "lis.bin")
        config = RunConfig.from_settings(linear_settings(tmp_path))
        report = MultilevelSampler(config, linear_models, read_lis_file(path)).run()
        warnings = [issue for issue in report.issues if issue.issue_type == "map_not_converged"]
        assert [issue.level for issue in warnings] == [0]
        assert report.status != RunStatus.PASS

    def test_failing_level_gives_a_partial_report(self, linear_models, tmp_path):
        config = RunConfig.from_settings(linear_settings(tmp_path, mode="MLpCN"))
        broken = BrokenModel(1, linear_models[1].operator, linear_models[1].qoi_weights, linear_models[1].observations)
        report = MultilevelSampler(config, [linear_models[0], broken, linear_models[2]]).run()
        assert not report.complete
        assert report.status == RunStatus.FAIL
        assert [stats.level for stats in report.levels] == [0]

    def test_tolerance_run_allocates_from_a_pilot(self, linear_models, tmp_path):
        config = RunConfig.from_settings(linear_settings(tmp_path, mode="MLpCN"))
        sampler = MultilevelSampler(config, linear_models)
        report = sampler.run(epsilon=0.5)
        assert report.allocation is not None
        assert len(sampler.pilot_stats) == 3
        assert all(n >= config.run.min_samples for n in report.allocation.num_samples)
        assert [stats.num_samples for stats in report.levels] == report.allocation.num_samples
        assert report.setup_cost > 0

    def test_runs_are_reproducible(self, linear_models, tmp_path):
        config = RunConfig.from_settings(linear_settings(tmp_path, mode="MLpCN"))
        first = MultilevelSampler(config, linear_models).run()
        second = MultilevelSampler(config, linear_models).run()
        assert first.estimate == second.estimate

    @pytest.mark.slow
    def test_estimate_matches_the_finest_posterior(self, linear_models, lis_result, tmp_path):
        config = RunConfig.from_settings(linear_settings(tmp_path, num_samples=[20_000, 10_000, 5_000]))
        report = MultilevelSampler(config, linear_models, lis_result).run()
        expected = linear_models[-1].posterior_qoi_mean()
        assert report.estimate == pytest.approx(expected, abs=5 * report.standard_error)

    @pytest.mark.slow
    def test_two_standard_errors_cover_the_posterior_mean(self, linear_models, lis_result, tmp_path):
        expected = linear_models[-1].posterior_qoi_mean()
        covered = []
        for seed in range(50):
            config = RunConfig.from_settings(
                linear_settings(tmp_path, seed=seed, num_samples=[2_000, 1_000, 500], workers=1)
            )
            report = MultilevelSampler(config, linear_models, lis_result).run()
            assert report.complete
            covered.append(abs(report.estimate - expected) <= 2 * report.standard_error)
        # nominal 0.954; 40 of 50 leaves room for IACT estimation error
        assert np.mean(covered) >= 0.8


class TestReports:
    def test_run_directory(self, linear_models, lis_result, tmp_path):
        settings = linear_settings(tmp_path)
        config = RunConfig.from_settings(settings)
        sampler = MultilevelSampler(config, linear_models, lis_result)
        report = sampler.run()
        paths = SamplerReportGenerator(settings).generate_all_reports(
            report, sampler.records, sampler.autocorrelations
        )
        with open(paths["json"]) as f:
            payload = json.load(f)
        assert payload["mode"] == "MLDILI"
        assert payload["estimate"] == pytest.approx(report.estimate)
        assert len(payload["levels"]) == 3
        assert len(pd.read_csv(paths["rates"])) == 3
        trace = pd.read_csv(paths["trace_level1_chain0"])
        np.testing.assert_allclose(trace["D"], trace["Q_fine"] - trace["Q_coarse"])
        assert "ESTIMATE" in open(paths["summary"]).read()
        autocorrelation = pd.read_csv(paths["autocorrelation_level0"])
        assert autocorrelation["lag"].iloc[-1] == "tau"

        table = pd.read_csv(SamplerReportGenerator(settings).generate_cost_vs_tolerance([paths["json"]]))
        assert table["method"].tolist() == ["MLDILI"]

    def test_lis_summary(self, lis_result, tmp_path):
        summary = SamplerReportGenerator(linear_settings(tmp_path)).generate_lis_summary(lis_result, tmp_path)
        with open(summary["json"]) as f:
            payload = json.load(f)
        assert [row["added"] for row in payload["levels"]] == list(lis_result.added)
        assert payload["levels"][0]["storage_reduction_factor"] == pytest.approx(1.0)


class TestCommandLine:
    def test_generate_build_run_report(self, tmp_path):
        config_file, _ = write_config(tmp_path)
        assert main(["generate-data", "--config", config_file]) == EXIT_OK
        assert (tmp_path / "data" / "observations.json").exists()
        assert main(["generate-data", "--config", config_file]) == EXIT_USAGE
        assert main(["build-lis", "--config", config_file]) == EXIT_OK
        assert (tmp_path / "data" / "lis_summary.json").exists()
        assert main(["build-lis", "--config", config_file]) == EXIT_USAGE
        assert main(["run", "--config", config_file, "--seed", "5"]) == EXIT_OK
        assert main(["run", "--config", config_file, "--mode", "MLpCN"]) == EXIT_OK
        assert len(list((tmp_path / "runs").glob("run_*/multilevel_report.json"))) == 2
        assert main(
            ["report", "--config", config_file, "--lis-summary", str(tmp_path / "data" / "lis_summary.json")]
        ) == EXIT_OK
        table = pd.read_csv(tmp_path / "runs" / "cost_vs_tolerance.csv")
        assert sorted(table["method"]) == ["MLDILI", "MLpCN"]
        assert (table.loc[table["method"] == "MLpCN", "lis_build_seconds"] == 0).all()

    def test_invalid_config_is_a_usage_error(self, tmp_path):
        config_file, _ = write_config(tmp_path, mode="Gibbs")
        assert main(["run", "--config", config_file]) == EXIT_USAGE

    def test_run_without_data(self, tmp_path):
        config_file, _ = write_config(tmp_path)
        assert main(["run", "--config", config_file]) == EXIT_USAGE

    def test_dimension_errors_are_usage_errors(self, tmp_path, monkeypatch):
        config_file, _ = write_config(tmp_path)

        def mismatched_run(config, settings):
            raise DimensionError("parameter vector has 7 entries, level 0 expects 6")

        monkeypatch.setattr(main_sampler, "cmd_run", mismatched_run)
        assert main(["run", "--config", config_file]) == EXIT_USAGE

    def test_stale_lis_is_a_usage_error(self, tmp_path):
        config_file, settings = write_config(tmp_path)
        assert main(["generate-data", "--config", config_file]) == EXIT_OK
        assert main(["build-lis", "--config", config_file]) == EXIT_OK
        settings["hierarchy"]["param_dim_base"] = 5
        with open(config_file, "w") as f:
            yaml.safe_dump(settings, f)
        assert main(["run", "--config", config_file]) == EXIT_USAGE
        assert not list((tmp_path / "runs").glob("run_*/multilevel_report.json"))

    @pytest.mark.slow
    def test_reduced_elliptic_pipeline(self, tmp_path):
        settings = {
            "hierarchy": {"num_levels": 3, "coarse_mesh_size": 0.25, "param_dim_base": 10, "param_dim_scale": 10},
            "data": {"data_file": str(tmp_path / "data" / "observations.json")},
            "laplace": {"num_gnh_samples": 5, "covariance_samples": 500},
            "lis": {"lis_file": str(tmp_path / "data" / "lis_basis.bin")},
            "run": {"mode": "MLDILI", "num_samples": [500, 300, 200], "workers": 2},
            "output": {"output_dir": str(tmp_path / "runs")},
        }
        config_file = tmp_path / "elliptic.yml"
        with open(config_file, "w") as f:
            yaml.safe_dump(settings, f)
        for command in ("generate-data", "build-lis", "run"):
            assert main([command, "--config", str(config_file)]) == EXIT_OK
        (report_file,) = (tmp_path / "runs").glob("run_MLDILI_*/multilevel_report.json")
        with open(report_file) as f:
            payload = json.load(f)
        assert payload["complete"]
        assert payload["status"] != "FAIL"
        assert np.isfinite(payload["estimate"])
        assert [level["num_samples"] for level in payload["levels"]] == [500, 300, 200]
