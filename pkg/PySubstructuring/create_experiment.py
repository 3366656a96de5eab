# This file adheres to the "black" code formatting style.
# More information about black: https://github.com/psf/black
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import List, Optional

from PySubstructuring.exceptions import ConfigError
from PySubstructuring.preset_mapper import PresetMapper
from PySubstructuring.schemes import (
    hyperbolic_schemes,
    parabolic_schemes,
    problems,
    rhs_sampling_rules,
    splittings,
)

logger = logging.getLogger(__name__)

STEP_TOL = 1e-12


def load_configuration():
    """
    Load the package defaults from settings.json and locate presets.json.

    Returns:
        tuple: The default configuration dict and the presets file path.
    """
    # Get the path of the directory containing this module
    module_dir = os.path.dirname(__file__)
    settings_file_path = os.path.join(module_dir, "config", "settings.json")
    presets_file_path = os.path.join(module_dir, "config", "presets.json")

    with open(settings_file_path, "r") as settings_file:
        settings_data = json.load(settings_file)
    return settings_data, presets_file_path


def _is_count(value, minimum: int) -> bool:
    return (
        not isinstance(value, bool)
        and isinstance(value, (int, float))
        and float(value).is_integer()
        and value >= minimum
    )


def _is_positive(value) -> bool:
    return (
        not isinstance(value, bool)
        and isinstance(value, (int, float))
        and math.isfinite(value)
        and value > 0
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One experiment: problem, exact-solution modes, grid, time stepping,
    scheme and decomposition. tau = T / Nsteps.
    """

    problem: str = "parabolic"
    n1: int = 2
    n2: int = 1
    l1: float = 1.0
    l2: float = 1.0
    N1: int = 40
    N2: int = 40
    T: float = 0.1
    Nsteps: int = 10
    scheme: str = "weighted"
    sigma: float = 0.5
    rhs_sampling: Optional[str] = None
    staged: bool = False
    hhat: float = 0.5
    splitting: str = "two"
    overlap_halfwidth: int = 0
    rel_tol: float = 1e-10
    # scales the initial data; 0 gives the zero solution
    amplitude: float = 1.0
    output_path: Optional[str] = None
    label: str = ""

    def __post_init__(self):
        if self.problem not in problems:
            raise ConfigError(f"problem must be one of {problems}, got {self.problem!r}")
        allowed = parabolic_schemes if self.problem == "parabolic" else hyperbolic_schemes
        if self.scheme not in allowed:
            raise ConfigError(
                f"scheme {self.scheme!r} is not available for the {self.problem} "
                f"problem, expected one of {allowed}"
            )
        for name in ("n1", "n2", "Nsteps"):
            if not _is_count(getattr(self, name), 1):
                raise ConfigError(f"{name} must be a positive integer")
        for name in ("N1", "N2"):
            if not _is_count(getattr(self, name), 2):
                raise ConfigError(f"{name} must be an integer >= 2")
        for name in ("l1", "l2", "T", "hhat", "rel_tol"):
            if not _is_positive(getattr(self, name)):
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not math.isfinite(self.sigma):
            raise ConfigError(f"sigma must be finite, got {self.sigma}")
        if not math.isfinite(self.amplitude):
            raise ConfigError(f"amplitude must be finite, got {self.amplitude}")
        if self.rhs_sampling is not None and self.rhs_sampling not in rhs_sampling_rules:
            raise ConfigError(f"rhs_sampling must be one of {rhs_sampling_rules}")
        if self.splitting not in splittings:
            raise ConfigError(f"splitting must be one of {splittings}")
        if not _is_count(self.overlap_halfwidth, 0):
            raise ConfigError("overlap_halfwidth must be a non-negative integer")
        if self.splitting == "three-overlap" and self.overlap_halfwidth < 1:
            raise ConfigError("splitting three-overlap needs overlap_halfwidth >= 1")
        for name in ("n1", "n2", "N1", "N2", "Nsteps", "overlap_halfwidth"):
            object.__setattr__(self, name, int(getattr(self, name)))

    @property
    def tau(self) -> float:
        return self.T / self.Nsteps

    @property
    def needs_decomposition(self) -> bool:
        return self.scheme != "weighted"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        """
        Build a config from a mapping that may carry ``tau`` or ``h``.

        ``tau`` fixes Nsteps = T / tau and ``h`` fixes N_alpha = l_alpha / h;
        both must divide exactly.

        Raises:
            ConfigError: For unknown keys or invalid values.
        """
        values = dict(values)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known - {"tau", "h"})
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}")
        h = values.pop("h", None)
        tau = values.pop("tau", None)
        defaults = cls()
        if h is not None:
            for axis in ("1", "2"):
                length = values.get("l" + axis, getattr(defaults, "l" + axis))
                values["N" + axis] = _divide(length, h, "l" + axis, "h")
        if tau is not None:
            values["Nsteps"] = _divide(values.get("T", defaults.T), tau, "T", "tau")
        try:
            return cls(**values)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _divide(total, step, total_name: str, step_name: str) -> int:
    if not (_is_positive(total) and _is_positive(step)):
        raise ConfigError(f"{total_name} and {step_name} must be positive")
    count = round(total / step)
    if count < 1 or abs(count * step - total) > STEP_TOL * max(1.0, abs(total)):
        raise ConfigError(
            f"{step_name} = {step} does not divide {total_name} = {total} exactly"
        )
    return int(count)


def _parse_value(text: str):
    # JSON literals for numbers, booleans and null, bare text otherwise
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """
    Parse flat ``key = value`` configuration text.

    One assignment per line; ``#`` starts a comment and blank lines are
    skipped. Values are read as JSON literals (``0.5``, ``16``, ``true``,
    ``null``) and fall back to plain strings (``scheme = factorized``).

    Raises:
        ConfigError: For lines without ``=``, empty keys or repeated keys.
    """
    values = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, separator, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not separator or not key:
            raise ConfigError(f"{source}:{number}: expected 'key = value', got {line!r}")
        if key in values:
            raise ConfigError(f"{source}:{number}: key {key!r} is set twice")
        values[key] = _parse_value(value)
    return values


def load_config_file(file_path: str) -> dict:
    """
    Read a ``key = value`` experiment configuration file.

    Raises:
        ConfigError: If the file is unreadable or malformed.
    """
    try:
        with open(file_path, "r") as config_file:
            text = config_file.read()
    except OSError as exc:
        raise ConfigError(f"Cannot read configuration {file_path}: {exc}") from exc
    return parse_config_text(text, file_path)


def merged_settings(
    file_path: Optional[str] = None, overrides: Optional[dict] = None
) -> dict:
    """Package defaults, then the config file, then explicit overrides."""
    settings_data, _ = load_configuration()
    values = dict(settings_data)
    if file_path is not None:
        values.update(load_config_file(file_path))
    explicit = {key: value for key, value in (overrides or {}).items() if value is not None}
    if "Nsteps" in explicit:
        values.pop("tau", None)
    if "N1" in explicit or "N2" in explicit:
        values.pop("h", None)
    values.update(explicit)
    return values


def build_config(
    file_path: Optional[str] = None, overrides: Optional[dict] = None
) -> ExperimentConfig:
    return ExperimentConfig.from_mapping(merged_settings(file_path, overrides))


def preset_name(preset: str) -> str:
    """Canonical name of a preset or alias, e.g. ``" Sigma_Orders"`` -> ``"fig5"``."""
    _, presets_file_path = load_configuration()
    return PresetMapper(presets_file_path, preset).preset


def build_preset_configs(
    preset: str, file_path: Optional[str] = None, overrides: Optional[dict] = None
) -> List[ExperimentConfig]:
    """
    One config per preset entry. Explicit overrides win over preset entries,
    which win over the file and the package defaults.
    """
    _, presets_file_path = load_configuration()
    mapper = PresetMapper(presets_file_path, preset)
    base = merged_settings(file_path)
    explicit = {key: value for key, value in (overrides or {}).items() if value is not None}
    configs = []
    for entry in mapper.expand(base):
        # an explicit count replaces the step the entry derives it from
        if "Nsteps" in explicit:
            entry.pop("tau", None)
        if "N1" in explicit or "N2" in explicit:
            entry.pop("h", None)
        entry.update(explicit)
        configs.append(ExperimentConfig.from_mapping(entry))
    logger.debug("Preset %s expanded to %d runs", mapper.preset, len(configs))
    return configs


def with_overrides(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(cfg, **changes)
