"""Report generation for sampler runs and LIS builds."""

import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import yaml
from jinja2 import Template

from data_class.ChainRecord import ChainRecord
from data_class.CoupledChainRecord import CoupledChainRecord
from data_class.LisBuildResult import LisBuildResult
from data_class.MultilevelReport import MultilevelReport
from lis_cost_model import cost_model, storage_reduction_factors

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["step", "accepted", "eta_fine", "eta_coarse", "Q_fine", "Q_coarse", "D"]


def _finite_or_none(value):
    if isinstance(value, (float, np.floating)) and not np.isfinite(value):
        return None
    return value


def trace_frame(record: ChainRecord | CoupledChainRecord) -> pd.DataFrame:
    """One row per retained step; base chains leave the coarse columns empty and D = Q."""
    if isinstance(record, CoupledChainRecord):
        columns = {
            "eta_fine": record.fine_misfits,
            "eta_coarse": record.coarse_misfits,
            "Q_fine": record.fine_qois,
            "Q_coarse": record.coarse_qois,
            "D": record.differences,
        }
    else:
        empty = np.full(record.num_samples, np.nan)
        columns = {
            "eta_fine": record.misfits,
            "eta_coarse": empty,
            "Q_fine": record.qois,
            "Q_coarse": empty,
            "D": record.qois,
        }
    frame = pd.DataFrame(columns)
    frame.insert(0, "accepted", np.asarray(record.accepted, dtype=int))
    frame.insert(0, "step", np.arange(record.num_samples))
    return frame[TRACE_COLUMNS]


class SamplerReportGenerator:
    """Generate the files of a sampler run, a LIS build and a cost-vs-tolerance table."""

    def get_file_content(self, filename: str) -> str:
        """Read and return the content of a template file next to this script."""
        file_path = Path(__file__).parent / filename
        with open(file_path, "r") as f:
            return f.read()

    def __init__(self, settings: Dict[str, Any]):
        self.settings = settings
        output_settings = settings.get("output") or {}
        self.output_dir = Path(output_settings.get("output_dir") or "sampler_runs")
        self.write_traces = output_settings.get("write_traces", True)
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def generate_all_reports(
        self,
        report: MultilevelReport,
        records: Optional[Dict[int, List[ChainRecord | CoupledChainRecord]]] = None,
        autocorrelations: Optional[Dict[int, Any]] = None,
    ) -> Dict[str, str]:
        """Write every run file into ``run_<mode>_<timestamp>/`` and return their paths."""
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        run_dir = self.output_dir / f"run_{report.mode}_{timestamp}"
        run_dir.mkdir(parents=True, exist_ok=True)

        reports = {
            "config": self.generate_config_echo(report, run_dir / "config_echo.yml"),
            "json": self.generate_json_report(report, run_dir / "multilevel_report.json"),
            "rates": self.generate_level_rates_csv(report, run_dir / "level_rates.csv"),
            "iact": self.generate_iact_table(report, run_dir / "iact_table.csv"),
        }
        if records and self.write_traces:
            for level, level_records in records.items():
                for chain, record in enumerate(level_records):
                    reports[f"trace_level{level}_chain{chain}"] = self.generate_trace_csv(
                        record, run_dir / f"trace_level{level}_chain{chain}.csv"
                    )
        for level, autocorr in (autocorrelations or {}).items():
            reports[f"autocorrelation_level{level}"] = self.generate_autocorrelation_csv(
                autocorr, run_dir / f"autocorrelation_level{level}.csv"
            )
        reports["summary"] = self.generate_summary_report(report, run_dir / "summary.txt")

        print("\n" + "=" * 60)
        print("SAMPLER RUN COMPLETE")
        print("=" * 60)
        print(f"Mode: {report.mode}")
        print(f"Status: {report.status.value}")
        print(f"Estimate: {report.estimate:.8g} +/- {report.standard_error:.3e}")
        print(f"Levels: {len(report.levels)}")
        print(f"Chain time: {report.total_cost:.2f} seconds")

        print("\nReports Generated:")
        for report_type, filepath in reports.items():
            print(f"  {report_type.upper()}: {filepath}")

        return {key: str(value) for key, value in reports.items()}

    def generate_config_echo(self, report: MultilevelReport, filepath: Path) -> str:
        with open(filepath, "w") as f:
            yaml.safe_dump(report.config, f, sort_keys=False)
        return str(filepath)

    def generate_json_report(self, report: MultilevelReport, filepath: Path) -> str:
        """Detailed JSON report; non-finite numbers are written as null."""
        with open(filepath, "w") as f:
            json.dump(_clean(report.to_dict()), f, indent=2, default=str)
        return str(filepath)

    def generate_level_rates_csv(self, report: MultilevelReport, filepath: Path) -> str:
        """Plot-ready (level, variance, bias proxy, cost) table."""
        rows = []
        for stats in report.levels:
            rows.append(
                {
                    "level": stats.level,
                    "fem_dof": stats.extra.get("fem_dof"),
                    "mean": stats.mean,
                    "variance": stats.variance,
                    "bias_proxy": stats.bias_proxy,
                    "cost_per_step": stats.cost_per_step,
                    "num_samples": stats.num_samples,
                }
            )
        pd.DataFrame(rows).to_csv(filepath, index=False)
        return str(filepath)

    def generate_iact_table(self, report: MultilevelReport, filepath: Path) -> str:
        """Levels x {refined parameters, QoI or D_l} IACTs."""
        frame = pd.DataFrame(
            [
                {
                    "level": stats.level,
                    "kernel": stats.kernel,
                    "refined_parameters": stats.param_iact,
                    "summand": stats.iact,
                    "effective_sample_size": stats.effective_sample_size,
                    "acceptance_rate": stats.acceptance_rate,
                }
                for stats in report.levels
            ]
        )
        frame.to_csv(filepath, index=False)
        return str(filepath)

    def generate_trace_csv(self, record, filepath: Path) -> str:
        trace_frame(record).to_csv(filepath, index=False)
        return str(filepath)

    def generate_autocorrelation_csv(self, autocorr, filepath: Path) -> str:
        """(lag, autocorrelation) rows followed by a tau summary row."""
        frame = pd.DataFrame(
            {"lag": np.arange(len(autocorr.curve)).astype(object), "autocorrelation": autocorr.curve}
        )
        summary = pd.DataFrame([{"lag": "tau", "autocorrelation": autocorr.tau}])
        pd.concat([frame, summary], ignore_index=True).to_csv(filepath, index=False)
        return str(filepath)

    def generate_summary_report(self, report: MultilevelReport, filepath: Path) -> str:
        template = Template(self.get_file_content("report_template/sampler_summary.txt"))
        with open(filepath, "w") as f:
            f.write(template.render(report=report))
        return str(filepath)

    def generate_lis_summary(
        self, result: LisBuildResult, output_dir: Optional[Path] = None, theta_c: float = 1.0
    ) -> Dict[str, str]:
        """Per-level added/total/single-level ranks, storage reduction and build times."""
        output_dir = Path(output_dir) if output_dir is not None else self.output_dir
        output_dir.mkdir(parents=True, exist_ok=True)
        hierarchy = result.basis.hierarchy.truncated(result.num_levels)
        single = list(result.single_ranks)
        have_single = bool(single) and all(rank is not None for rank in single)
        reductions = (
            storage_reduction_factors(hierarchy, result.added, single, theta_c)
            if have_single
            else [None] * result.num_levels
        )

        rows = []
        for level in range(result.num_levels):
            rows.append(
                {
                    "level": level,
                    "param_dim": hierarchy.param_dim[level],
                    "added": result.added[level],
                    "total": result.ranks[level],
                    "single_level": single[level] if have_single else None,
                    "storage_reduction_factor": _finite_or_none(reductions[level]),
                    "build_seconds": _at(result.build_seconds, level),
                    "single_build_seconds": _at(result.single_build_seconds, level),
                    "build_seconds_without_recycling": _at(
                        result.build_seconds_without_recycling, level
                    ),
                }
            )
        summary = {
            "threshold": result.threshold,
            "levels": rows,
            "cost_model": (
                cost_model(hierarchy, result.added, single[-1], theta_c).to_dict()
                if have_single
                else None
            ),
            "total_build_seconds": float(sum(result.build_seconds)),
            "total_build_seconds_without_recycling": (
                float(sum(result.build_seconds_without_recycling))
                if result.build_seconds_without_recycling
                else None
            ),
        }

        json_path = output_dir / "lis_summary.json"
        with open(json_path, "w") as f:
            json.dump(_clean(summary), f, indent=2, default=str)

        txt_path = output_dir / "lis_summary.txt"
        table = pd.DataFrame(rows)[
            ["level", "added", "total", "single_level", "storage_reduction_factor"]
        ]
        with open(txt_path, "w") as f:
            f.write("LIKELIHOOD-INFORMED SUBSPACE DIMENSIONS\n")
            f.write("=" * 50 + "\n\n")
            f.write(f"Truncation threshold: {result.threshold:g}\n\n")
            f.write(table.to_string(index=False, na_rep="-", float_format=lambda x: f"{x:.2f}"))
            f.write("\n")
        print(table.to_string(index=False, na_rep="-", float_format=lambda x: f"{x:.2f}"))
        return {"json": str(json_path), "summary": str(txt_path)}

    def generate_cost_vs_tolerance(
        self,
        report_files: Sequence[str | Path],
        lis_summary_file: Optional[str | Path] = None,
        filepath: Optional[Path] = None,
    ) -> str:
        """One row per report: method, tolerance and CPU seconds, plus the LIS build cost for DILI modes."""
        lis_seconds = lis_seconds_without_recycling = None
        if lis_summary_file is not None:
            with open(lis_summary_file, "r") as f:
                lis_summary = json.load(f)
            lis_seconds = lis_summary.get("total_build_seconds")
            lis_seconds_without_recycling = lis_summary.get("total_build_seconds_without_recycling")

        rows = []
        for report_file in report_files:
            with open(report_file, "r") as f:
                payload = json.load(f)
            uses_lis = payload["mode"] in ("DILI", "MLDILI", "MLmixed")
            sampling = (payload.get("total_cost") or 0.0) + (payload.get("setup_cost") or 0.0)
            rows.append(
                {
                    "method": payload["mode"],
                    "epsilon": payload.get("epsilon"),
                    "estimate": payload.get("estimate"),
                    "standard_error": payload.get("standard_error"),
                    "sampling_seconds": sampling,
                    "lis_build_seconds": lis_seconds if uses_lis else 0.0,
                    "lis_build_seconds_without_recycling": (
                        lis_seconds_without_recycling if uses_lis else 0.0
                    ),
                    "total_cpu_seconds": sampling + ((lis_seconds or 0.0) if uses_lis else 0.0),
                    "status": payload.get("status"),
                    "report_file": str(report_file),
                }
            )
        frame = pd.DataFrame(rows)
        if not frame.empty:
            frame = frame.sort_values(["method", "epsilon"], ascending=[True, False], na_position="last")
        filepath = Path(filepath) if filepath is not None else self.output_dir / "cost_vs_tolerance.csv"
        frame.to_csv(filepath, index=False)
        logger.info(f"Wrote {len(frame)} rows to {filepath}")
        return str(filepath)


def _at(values: Sequence[float], index: int):
    return values[index] if index < len(values) else None


def _clean(value):
    """Recursively replace NaN/inf with None and numpy scalars/arrays with Python types."""
    if isinstance(value, dict):
        return {key: _clean(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(item) for item in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    return _finite_or_none(value)
