"""
Experiment configuration: presets, parsing and validation.

A configuration document is flat YAML, one `key: value` per line. Values are
resolved in this order, later winning: preset defaults, the preset's block
for the chosen experiment, the document, explicit overrides (CLI flags).
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import yaml

from shared.file_utils import validate_config_file

from ..canonical_sampler import MAX_SEED, ThermostatSpec
from ..ensemble import EnsembleSpec
from ..errors import ConfigError
from ..md_engine import BoxSpec, PotentialSpec
from ..trajectory_observables import BinSpec, FunctionalId, FunctionalKind

logger = logging.getLogger(__name__)

PRESET_DIR = Path(__file__).parent / "presets"
PRESETS = ("desk", "paper")
EXPERIMENTS = ("exp1", "exp2", "exp3", "exp4", "exp5")
COMMENSURATE_TOLERANCE = 1e-9

# document keys; `dt` maps onto ExperimentConfig.dt_values
KNOWN_KEYS = frozenset({
    "experiment", "n_particles", "box_side", "r_cutoff", "well_depth_scale", "beta", "gamma",
    "langevin_dt", "burn_in_steps", "dt", "dt_ref", "T", "ensemble_size", "kick", "particle",
    "functionals", "tau", "num_bins", "bin_ranges", "seed", "output_dir", "workers", "epsilon",
    "divergence_threshold",
})


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated settings for one experiment run."""
    experiment: str = "exp3"
    n_particles: int = 100
    box_side: float = 11.5
    r_cutoff: float = 2.5
    well_depth_scale: float = 4.0
    beta: float = 1.0
    gamma: float = 1.0
    langevin_dt: float = 0.01
    burn_in_steps: int = 100_000
    dt_values: Tuple[float, ...] = (0.01, 0.005, 0.0025)
    dt_ref: float = 0.001
    T: float = 100.0
    ensemble_size: int = 1000
    kick: Optional[Tuple[float, float]] = None
    particle: int = 0
    functionals: Tuple[str, ...] = ("F1", "F2", "F3", "F4", "F5")
    tau: float = 0.1
    num_bins: int = 40
    bin_ranges: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    seed: int = 0
    output_dir: str = "results"
    workers: int = 1
    epsilon: Optional[float] = None
    divergence_threshold: float = 1.0
    preset: str = "paper"

    def box(self) -> BoxSpec:
        return BoxSpec(self.box_side)

    def potential(self) -> PotentialSpec:
        return PotentialSpec(self.r_cutoff, self.well_depth_scale)

    def thermostat(self) -> ThermostatSpec:
        return ThermostatSpec(self.beta, self.gamma, self.langevin_dt, self.burn_in_steps, self.seed)

    def ensemble_spec(self) -> EnsembleSpec:
        return EnsembleSpec(
            box=self.box(),
            potential=self.potential(),
            thermostat=self.thermostat(),
            n_particles=self.n_particles,
            T=self.T,
            master_seed=self.seed,
            particle=self.particle,
            kick=self.kick,
        )

    def functional_ids(self) -> Tuple[FunctionalId, ...]:
        return tuple(FunctionalId.parse(name, self.tau) for name in self.functionals)

    def bin_spec(self, name: str) -> Optional[BinSpec]:
        """Configured bins for a functional, or None to derive them from the data."""
        if name not in self.bin_ranges:
            return None
        low, high = self.bin_ranges[name]
        return BinSpec(low, high, self.num_bins)

    def to_dict(self) -> Dict[str, Any]:
        record = asdict(self)
        record["dt_values"] = list(self.dt_values)
        record["functionals"] = list(self.functionals)
        record["kick"] = None if self.kick is None else list(self.kick)
        record["bin_ranges"] = {k: list(v) for k, v in sorted(self.bin_ranges.items())}
        return record


def _key_lines(raw_text: str) -> Dict[str, int]:
    """1-based line of every top-level key, for error messages."""
    try:
        node = yaml.compose(raw_text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return {}
    if not isinstance(node, yaml.MappingNode):
        return {}
    return {
        str(key.value): key.start_mark.line + 1
        for key, _ in node.value
        if isinstance(key, yaml.ScalarNode)
    }


def parse_document(raw_text: str) -> Tuple[Dict[str, Any], Dict[str, int]]:
    """
    Parse a configuration document into a key-value mapping.

    Raises:
        ConfigError: On YAML syntax errors (with line) or a non-mapping document
    """
    try:
        data = yaml.safe_load(raw_text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(e, "problem", None) or str(e)
        raise ConfigError(f"Cannot parse configuration: {problem}", line=line) from e
    if data is None:
        return {}, {}
    if not isinstance(data, dict):
        raise ConfigError("Configuration must be a key-value mapping", line=1)
    return data, _key_lines(raw_text)


def load_preset(name: str) -> Dict[str, Any]:
    """Read presets/<name>.yaml."""
    if name not in PRESETS:
        raise ConfigError(f"Unknown preset '{name}', expected one of {', '.join(PRESETS)}", field="preset")
    with open(PRESET_DIR / f"{name}.yaml", "r", encoding="utf-8") as handle:
        return yaml.safe_load(handle)


def _number(value: Any, name: str, line: Optional[int], integer: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"Expected a number, got {value!r}", field=name, line=line)
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"Expected an integer, got {value!r}", field=name, line=line)
        return int(value)
    if not math.isfinite(value):
        raise ConfigError(f"Expected a finite number, got {value!r}", field=name, line=line)
    return float(value)


def _positive(value: Any, name: str, line: Optional[int], integer: bool = False) -> float:
    number = _number(value, name, line, integer)
    if not number > 0:
        raise ConfigError(f"Must be positive, got {number}", field=name, line=line)
    return number


def _experiment_name(value: Any, line: Optional[int]) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"Expected an experiment name, got {value!r}", field="experiment", line=line)
    if value not in EXPERIMENTS:
        raise ConfigError(
            f"Unknown experiment '{value}', expected one of {', '.join(EXPERIMENTS)}",
            field="experiment", line=line,
        )
    return value


def _bin_ranges(
    raw: Any, functionals: Tuple[str, ...], line: Optional[int], from_document: bool
) -> Dict[str, Tuple[float, float]]:
    """
    Validate `bin_ranges`, a mapping from functional name to [low, high].

    Ranges the document sets must name configured functionals. Preset ranges
    for functionals that are not configured are dropped.
    """
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"bin_ranges must map functionals to [low, high], got {raw!r}", field="bin_ranges",
                          line=line)
    ranges: Dict[str, Tuple[float, float]] = {}
    for name, bounds in raw.items():
        key = str(name).upper()
        if key not in functionals:
            if from_document:
                raise ConfigError(f"'{name}' is not a configured functional", field="bin_ranges",
                                  line=line)
            continue
        if not isinstance(bounds, list) or len(bounds) != 2:
            raise ConfigError(f"Range for {name} must be [low, high]", field="bin_ranges", line=line)
        low, high = (_number(v, "bin_ranges", line) for v in bounds)
        if not high > low:
            raise ConfigError(f"Range for {name} needs high > low", field="bin_ranges", line=line)
        ranges[key] = (low, high)
    return ranges


def _commensurate(T: float, dt: float) -> bool:
    ratio = T / dt
    return round(ratio) >= 1 and abs(ratio - round(ratio)) <= COMMENSURATE_TOLERANCE * max(ratio, 1.0)


def _build(values: Mapping[str, Any], lines: Mapping[str, int], preset: str) -> ExperimentConfig:
    def line(key: str) -> Optional[int]:
        return lines.get(key)

    experiment = _experiment_name(values["experiment"], line("experiment"))

    n_particles = _positive(values["n_particles"], "n_particles", line("n_particles"), integer=True)
    if n_particles < 2:
        raise ConfigError("At least 2 particles are required", field="n_particles", line=line("n_particles"))
    box_side = _positive(values["box_side"], "box_side", line("box_side"))
    r_cutoff = _positive(values["r_cutoff"], "r_cutoff", line("r_cutoff"))
    well_depth_scale = _positive(values["well_depth_scale"], "well_depth_scale", line("well_depth_scale"))
    try:
        potential = PotentialSpec(r_cutoff, well_depth_scale)
    except ValueError as e:
        raise ConfigError(str(e), field="r_cutoff", line=line("r_cutoff")) from e
    try:
        BoxSpec(box_side).check_cutoff(potential)
    except ValueError as e:
        raise ConfigError(str(e), field="box_side", line=line("box_side")) from e

    raw_dt = values["dt"]
    dt_list = raw_dt if isinstance(raw_dt, list) else [raw_dt]
    if not dt_list:
        raise ConfigError("At least one step size is required", field="dt", line=line("dt"))
    dt_values = tuple(_positive(dt, "dt", line("dt")) for dt in dt_list)
    T = _positive(values["T"], "T", line("T"))
    for dt in dt_values:
        if not _commensurate(T, dt):
            raise ConfigError(f"T={T} is not a multiple of dt={dt}", field="dt", line=line("dt"))
    dt_ref = _positive(values["dt_ref"], "dt_ref", line("dt_ref"))
    if experiment == "exp5" and not _commensurate(T, dt_ref):
        raise ConfigError(f"T={T} is not a multiple of dt_ref={dt_ref}", field="dt_ref", line=line("dt_ref"))

    kick = values.get("kick")
    if kick is not None:
        if not isinstance(kick, list) or len(kick) != 2:
            raise ConfigError("kick must be a list of two numbers", field="kick", line=line("kick"))
        kick = tuple(_number(v, "kick", line("kick")) for v in kick)

    particle = _number(values["particle"], "particle", line("particle"), integer=True)
    if not 0 <= particle < n_particles:
        raise ConfigError(f"Particle {particle} out of range for n={n_particles}", field="particle",
                          line=line("particle"))

    functionals = values["functionals"]
    if not isinstance(functionals, list) or not functionals:
        raise ConfigError("functionals must be a non-empty list", field="functionals", line=line("functionals"))
    known = {kind.value for kind in FunctionalKind}
    for name in functionals:
        if str(name).upper() not in known:
            raise ConfigError(f"Unknown functional '{name}'", field="functionals", line=line("functionals"))
    functionals = tuple(str(name).upper() for name in functionals)
    tau = _positive(values["tau"], "tau", line("tau"))
    if "F5" in functionals and not 2.0 * tau <= T:
        raise ConfigError(f"F5 needs T >= 2 tau, got T={T}, tau={tau}", field="tau", line=line("tau"))

    # only the document carries line numbers
    bin_ranges = _bin_ranges(values.get("bin_ranges"), functionals, line("bin_ranges"), "bin_ranges" in lines)

    seed = _number(values["seed"], "seed", line("seed"), integer=True)
    if not 0 <= seed < MAX_SEED:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}", field="seed", line=line("seed"))

    epsilon = values.get("epsilon")
    if epsilon == "auto":
        epsilon = None
    elif epsilon is not None:
        epsilon = _positive(epsilon, "epsilon", line("epsilon"))
        if not epsilon < 1:
            raise ConfigError(f"epsilon must lie in (0, 1), got {epsilon}", field="epsilon", line=line("epsilon"))

    return ExperimentConfig(
        experiment=experiment,
        n_particles=n_particles,
        box_side=box_side,
        r_cutoff=r_cutoff,
        well_depth_scale=potential.well_depth_scale,
        beta=_positive(values["beta"], "beta", line("beta")),
        gamma=_positive(values["gamma"], "gamma", line("gamma")),
        langevin_dt=_positive(values["langevin_dt"], "langevin_dt", line("langevin_dt")),
        burn_in_steps=_positive(values["burn_in_steps"], "burn_in_steps", line("burn_in_steps"), integer=True),
        dt_values=dt_values,
        dt_ref=dt_ref,
        T=T,
        ensemble_size=_positive(values["ensemble_size"], "ensemble_size", line("ensemble_size"), integer=True),
        kick=kick,
        particle=particle,
        functionals=functionals,
        tau=tau,
        num_bins=_positive(values["num_bins"], "num_bins", line("num_bins"), integer=True),
        bin_ranges=bin_ranges,
        seed=seed,
        output_dir=str(values["output_dir"]),
        workers=_positive(values["workers"], "workers", line("workers"), integer=True),
        epsilon=epsilon,
        divergence_threshold=_positive(values.get("divergence_threshold", 1.0), "divergence_threshold",
                                       line("divergence_threshold")),
        preset=preset,
    )


def validate_config(
    raw_text: str,
    preset: str = "paper",
    overrides: Optional[Mapping[str, Any]] = None,
) -> ExperimentConfig:
    """
    Parse and validate a configuration document.

    Args:
        raw_text (str): YAML key-value document; empty means all defaults
        preset (str): 'paper' or 'desk'
        overrides (Mapping, optional): Values that win over the document (CLI flags)

    Returns:
        ExperimentConfig: Validated configuration

    Raises:
        ConfigError: Naming the field and, when known, the line
    """
    document, lines = parse_document(raw_text)
    for key in document:
        if key not in KNOWN_KEYS:
            raise ConfigError(f"Unknown key '{key}'", field=str(key), line=lines.get(str(key)))

    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    preset_data = load_preset(preset)
    if "experiment" in document:
        _experiment_name(document["experiment"], lines.get("experiment"))
    experiment = _experiment_name(
        overrides.get("experiment", document.get("experiment", preset_data["defaults"]["experiment"])),
        lines.get("experiment"),
    )

    values: Dict[str, Any] = dict(preset_data["defaults"])
    values.update((preset_data.get("experiments") or {}).get(experiment, {}))
    values.update(document)
    values.update(overrides)
    values["experiment"] = experiment

    config = _build(values, lines, preset)
    logger.debug(f"Resolved {config.experiment} configuration from preset '{preset}'")
    return config


def load_config(
    config_path: Optional[str] = None,
    preset: str = "paper",
    overrides: Optional[Mapping[str, Any]] = None,
) -> ExperimentConfig:
    """Read a configuration file (or none) and validate it."""
    raw_text = ""
    if config_path:
        try:
            path = validate_config_file(config_path)
        except (FileNotFoundError, ValueError) as e:
            raise ConfigError(str(e), field="config") from e
        raw_text = path.read_text(encoding="utf-8")
    return validate_config(raw_text, preset, overrides)
