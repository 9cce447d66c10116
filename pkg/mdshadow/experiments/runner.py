"""
Experiment runner.

Each experiment writes plot-ready CSV/JSON files into the output directory,
then a manifest.json listing every file this run wrote with its SHA-256.
Files left in the directory by earlier runs are not listed. Simulation may
use several processes; all files are written from the calling process in a
fixed order, so identical configurations give identical manifests.
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from shared.csv_io import save_json, save_to_csv
from shared.file_utils import ensure_output_dir, file_sha256, output_filename
from shared.logger import log_duration

from ..distribution_metrics import ks_distance, ks_threshold
from ..ensemble import initial_conditions, simulate_ensemble
from ..shadow_coupler import shadow_md_pipeline
from ..trajectory_observables import (
    BinSpec,
    Histogram,
    PathPL,
    brownian_reference,
    eval_functionals,
    first_divergence_time,
    histogram,
    sup_distance,
    value_columns,
)
from ..utils import log_run_to_file
from .config import ExperimentConfig

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
LOG_DIR_NAME = "logs"


@dataclass
class RunResult:
    """Files and headline numbers of one experiment run."""
    experiment: str
    output_dir: str
    files: List[Dict[str, Any]] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    config: Optional[ExperimentConfig] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "experiment": self.experiment,
            "output_dir": self.output_dir,
            "files": self.files,
            "summary": self.summary,
            "config": None if self.config is None else self.config.to_dict(),
        }


class OutputFiles:
    """Writes into one output directory and remembers every file written."""

    def __init__(self, out: Path):
        self.out = out
        self.written: List[Path] = []

    def csv(self, frame: pd.DataFrame, stem: str, suffix: str = "") -> str:
        path = save_to_csv(frame, output_filename(stem, suffix, str(self.out)))
        self.written.append(Path(path))
        return path

    def json(self, payload: Dict[str, Any], filename: str) -> str:
        path = save_json(payload, str(self.out / filename))
        self.written.append(Path(path))
        return path


def _dt_tag(dt: float) -> str:
    return f"_dt{dt:g}"


def _run_trajectories(config: ExperimentConfig, outputs: OutputFiles) -> Dict[str, Any]:
    spec = config.ensemble_spec()
    dt = config.dt_values[0]
    members = list(range(config.ensemble_size))
    paths = simulate_ensemble(spec, dt, members, config.workers)
    for member, path in zip(members, paths):
        outputs.csv(path.to_frame(), f"trajectory_m{member}", _dt_tag(dt))
    endpoints = [float(np.linalg.norm(p.values[-1])) for p in paths]
    return {"trajectories": len(paths), "dt": dt, "mean_final_displacement": float(np.mean(endpoints))}


def _run_divergence(config: ExperimentConfig, outputs: OutputFiles) -> Dict[str, Any]:
    spec = config.ensemble_spec()
    members = list(range(config.ensemble_size))
    states = initial_conditions(spec, members, config.workers)
    paths_by_dt: Dict[float, List[PathPL]] = {}
    for dt in config.dt_values:
        paths_by_dt[dt] = simulate_ensemble(spec, dt, members, config.workers, states=states)
        for member, path in zip(members, paths_by_dt[dt]):
            outputs.csv(path.to_frame(), f"divergence_m{member}", _dt_tag(dt))

    rows = []
    for dt_a, dt_b in combinations(config.dt_values, 2):
        for member in members:
            a, b = paths_by_dt[dt_a][member], paths_by_dt[dt_b][member]
            crossing = first_divergence_time(a, b, config.divergence_threshold)
            rows.append({
                "member": member,
                "dt_a": dt_a,
                "dt_b": dt_b,
                "sup_distance": sup_distance(a, b),
                "first_time_over_threshold": np.nan if crossing is None else crossing,
            })
    summary_frame = pd.DataFrame(
        rows, columns=["member", "dt_a", "dt_b", "sup_distance", "first_time_over_threshold"]
    )
    outputs.csv(summary_frame, "divergence_summary")

    summary: Dict[str, Any] = {"members": len(members), "threshold": config.divergence_threshold}
    if len(config.dt_values) > 1:
        first_pair = summary_frame[
            (summary_frame["dt_a"] == config.dt_values[0]) & (summary_frame["dt_b"] == config.dt_values[1])
        ]
        summary["diverged_fraction"] = float(first_pair["first_time_over_threshold"].notna().mean())
    return summary


def _shared_bins(config: ExperimentConfig, name: str, samples: Sequence[np.ndarray]) -> BinSpec:
    configured = config.bin_spec(name)
    if configured is not None:
        return configured
    pooled = np.concatenate([np.asarray(s, dtype=float) for s in samples])
    pooled = pooled[np.isfinite(pooled)]
    if pooled.size == 0:
        return BinSpec(-1.0, 1.0, config.num_bins)
    low, high = float(pooled.min()), float(pooled.max())
    if not high > low:
        low, high = low - 0.5, high + 0.5
    logger.info(f"No bin range configured for {name}; using pooled data range [{low:.4g}, {high:.4g}]")
    return BinSpec(low, high, config.num_bins)


def _brownian_values(config: ExperimentConfig, variance: float) -> pd.DataFrame:
    functionals = config.functional_ids()
    dt_grid = config.dt_values[0]
    rows = [
        eval_functionals(functionals, brownian_reference(variance, config.T, dt_grid, config.seed, member))
        for member in range(config.ensemble_size)
    ]
    return pd.DataFrame(rows, columns=value_columns(config.functionals, rows))


def _run_histograms(config: ExperimentConfig, outputs: OutputFiles) -> Dict[str, Any]:
    spec = config.ensemble_spec()
    functionals = config.functional_ids()
    members = list(range(config.ensemble_size))
    states = initial_conditions(spec, members, config.workers)

    tables: Dict[str, pd.DataFrame] = {}
    for dt in config.dt_values:
        rows = simulate_ensemble(spec, dt, members, config.workers, states=states, functionals=functionals)
        table = pd.DataFrame(rows, columns=value_columns(config.functionals, rows))
        table.insert(0, "member", members)
        outputs.csv(table, "values", _dt_tag(dt))
        tables[f"{dt:g}"] = table

    if config.experiment == "exp3" and "F1" in config.functionals:
        first = tables[f"{config.dt_values[0]:g}"]["F1"].to_numpy()
        variance = float(np.var(first, ddof=1)) if first.size > 1 else float("nan")
        if np.isfinite(variance) and variance > 0:
            brownian = _brownian_values(config, variance)
            brownian.insert(0, "member", members)
            outputs.csv(brownian, "values_brownian")
            tables["brownian"] = brownian
        else:
            logger.warning("Brownian reference skipped: F1 variance is undefined for this ensemble")

    histograms: Dict[str, Dict[str, Histogram]] = {}
    for name in config.functionals:
        bins = _shared_bins(config, name, [t[name].to_numpy() for t in tables.values()])
        histograms[name] = {}
        for tag, table in tables.items():
            hist = histogram(table[name].to_numpy(), bins)
            histograms[name][tag] = hist
            suffix = "_brownian" if tag == "brownian" else f"_dt{tag}"
            outputs.csv(hist.to_frame(), f"hist_{name}", suffix)

    ks_rows = []
    for name in config.functionals:
        for dt_a, dt_b in combinations(config.dt_values, 2):
            ks = ks_distance(histograms[name][f"{dt_a:g}"], histograms[name][f"{dt_b:g}"])
            ks_rows.append({"functional": name, "dt_a": dt_a, "dt_b": dt_b, "ks": ks})
    ks_frame = pd.DataFrame(ks_rows, columns=["functional", "dt_a", "dt_b", "ks"])
    outputs.csv(ks_frame, "ks_summary")

    threshold = ks_threshold(config.ensemble_size, config.ensemble_size)
    summary: Dict[str, Any] = {"members": len(members), "ks_threshold_95": threshold}
    if not ks_frame.empty:
        summary["max_ks"] = float(ks_frame["ks"].max())
        summary["ks_below_threshold"] = bool((ks_frame["ks"] < threshold).all())
    return summary


def _run_shadow(config: ExperimentConfig, outputs: OutputFiles) -> Dict[str, Any]:
    diagnostic = shadow_md_pipeline(config, workers=config.workers)
    outputs.json(diagnostic.to_dict(), "shadow_report.json")
    return {
        "alpha": diagnostic.alpha,
        "epsilon": diagnostic.epsilon,
        "beta": diagnostic.beta,
        "pass": diagnostic.passed,
    }


RUNNERS: Dict[str, Callable[[ExperimentConfig, OutputFiles], Dict[str, Any]]] = {
    "exp1": _run_trajectories,
    "exp2": _run_divergence,
    "exp3": _run_histograms,
    "exp4": _run_histograms,
    "exp5": _run_shadow,
}


def write_manifest(out: Path, experiment: str, written: Sequence[Path]) -> List[Dict[str, Any]]:
    """Hash the files written by this run into manifest.json, sorted by path."""
    entries = []
    for relative in sorted({Path(p).relative_to(out).as_posix() for p in written}):
        path = out / relative
        entries.append({"path": relative, "sha256": file_sha256(str(path)), "bytes": path.stat().st_size})
    save_json({"experiment": experiment, "files": entries}, str(out / MANIFEST_NAME))
    return entries


def run_experiment(config: ExperimentConfig) -> RunResult:
    """
    Run one experiment and write its outputs.

    Args:
        config (ExperimentConfig): Validated configuration

    Returns:
        RunResult: Manifest entries and summary numbers

    Raises:
        InstabilityError: If a trajectory blows up (carries dt and step)
    """
    out = ensure_output_dir(config.output_dir)

    @log_run_to_file(config.experiment, output_dir=str(out / LOG_DIR_NAME))
    def _run(cfg: ExperimentConfig) -> RunResult:
        logger.info(f"Starting {cfg.experiment} (preset={cfg.preset}, seed={cfg.seed}, out={out})")
        outputs = OutputFiles(out)
        outputs.json(cfg.to_dict(), "config.json")
        with log_duration(logger, cfg.experiment):
            summary = RUNNERS[cfg.experiment](cfg, outputs)
        files = write_manifest(out, cfg.experiment, outputs.written)
        logger.info(f"Wrote {len(files)} files to {out}")
        return RunResult(cfg.experiment, str(out), files, summary, cfg)

    return _run(config)
