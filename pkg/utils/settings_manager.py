import copy
import hashlib
import json
import logging
import os

import numpy as np

from utils.config import (
    SCENARIO_FOLDER, SCENARIO_VERSION, SPECIES_MASS_AMU, THERMAL_TAIL_TOLERANCE, TRUNCATION_N_IONS_MAX,
)
from utils.errors import ConfigError

logger = logging.getLogger(__name__)

SCENARIO_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), SCENARIO_FOLDER)

_BEAM_DEFAULTS = {
    "power_w": 1e-3,
    "wavelength_m": 355e-9,
    "waist_x_m": 1.4e-6,
    "waist_z_m": 10e-6,
    "focal_y_x_m": 0.0,
    "focal_y_z_m": 0.0,
    "phase0_rad": 0.0,
    "propagation_sign": 1,
}

# Every key a scenario may set; nested dicts are merged section by section
DEFAULT_SCENARIO = {
    "version": SCENARIO_VERSION,
    "name": "scenario",
    "beam1": dict(_BEAM_DEFAULTS),
    "beam2": dict(_BEAM_DEFAULTS),
    "trap": {
        "ions": 1,
        "species": "171Yb+",
        "axial_hz": 153e3,
        "horizontal_hz": 3.0e6,
        "vertical_hz": 2.5e6,
        "mode_table": None,
    },
    "addressing": {
        "ion": None,  # middle ion
        "mode": None,  # lowest axial mode
        "geometry": "co",
        "x0_m": 0.0,
        "y0_m": 0.0,
        "z0_m": 0.0,
        "rotation_rad": [0.0, 0.0, 0.0],
        "effective_dipole": 1.0,
    },
    "run": {
        "nbar0_source": "doppler",
        "nbar0": None,
        "heating_rate_per_s": 0.0,
        "delay_grid_s": None,
        "nbar_grid": None,
        "sequences": ["single"],
        "phase_error_model": "progressive",
        "phase_error_rad": 0.0,
        "amplitude_error": 0.0,
        "tolerances": {
            "thermal_tail": THERMAL_TAIL_TOLERANCE,
        },
    },
    "truncation": {
        "threshold": 1e-2,
        "caps": {"p": 4, "q": 8},
        "dominant": True,
        "n_ions_max": TRUNCATION_N_IONS_MAX,
        "scenarios": [
            {"name": "doppler", "axial": 100, "horizontal": 100, "vertical": 100},
        ],
    },
    "fit": {
        "max_nbar": 1e4,
        "xatol": 1e-6,
    },
}

_POSITIVE = {
    "beam1": ("power_w", "wavelength_m", "waist_x_m", "waist_z_m"),
    "beam2": ("power_w", "wavelength_m", "waist_x_m", "waist_z_m"),
    "trap": ("ions", "axial_hz", "horizontal_hz", "vertical_hz"),
}


def _merge(defaults: dict, section: dict, path: str) -> dict:
    """Overlay section on defaults, recursing into nested sections and rejecting unknown keys."""
    if not isinstance(section, dict):
        raise ConfigError(f"expected a section, got {type(section).__name__}", path or None)
    unknown = sorted(set(section) - set(defaults))
    if unknown:
        raise ConfigError("unknown key", f"{path}.{unknown[0]}" if path else unknown[0])
    merged = {**copy.deepcopy(defaults), **section}
    for key, default in defaults.items():
        if isinstance(default, dict) and key in section:
            merged[key] = _merge(default, section[key], f"{path}.{key}" if path else key)
    return merged


def expand_grid(value, field: str) -> np.ndarray:
    """A grid given as an explicit list or as {start, stop, num} (linear spacing)."""
    if isinstance(value, dict):
        unknown = sorted(set(value) - {"start", "stop", "num"})
        if unknown:
            raise ConfigError("unknown key", f"{field}.{unknown[0]}")
        try:
            grid = np.linspace(float(value["start"]), float(value["stop"]), int(value["num"]))
        except KeyError as e:
            raise ConfigError(f"missing {e.args[0]!r}", field) from None
    elif isinstance(value, (list, tuple)):
        grid = np.asarray(value, dtype=float)
    else:
        raise ConfigError("expected a list or {start, stop, num}", field)
    if grid.size == 0:
        raise ConfigError("grid is empty", field)
    if np.any(grid < 0) or not np.all(np.isfinite(grid)):
        raise ConfigError("grid values must be finite and non-negative", field)
    return grid


def validate_scenario(config: dict) -> dict:
    """Check a merged scenario; returns it unchanged."""
    if str(config["version"]) != SCENARIO_VERSION:
        raise ConfigError(f"unsupported version {config['version']!r}, expected {SCENARIO_VERSION!r}", "version")
    for section, keys in _POSITIVE.items():
        for key in keys:
            value = config[section][key]
            if not isinstance(value, (int, float)) or not value > 0:
                raise ConfigError(f"must be positive, got {value!r}", f"{section}.{key}")
    for beam in ("beam1", "beam2"):
        if config[beam]["propagation_sign"] not in (1, -1):
            raise ConfigError("must be +1 or -1", f"{beam}.propagation_sign")

    trap = config["trap"]
    if trap["species"] not in SPECIES_MASS_AMU:
        raise ConfigError(f"unknown species {trap['species']!r}; known: {sorted(SPECIES_MASS_AMU)}", "trap.species")

    addressing = config["addressing"]
    if addressing["geometry"] not in ("co", "counter"):
        raise ConfigError("must be 'co' or 'counter'", "addressing.geometry")
    ion = addressing["ion"]
    if ion is not None and not 0 <= int(ion) < int(trap["ions"]):
        raise ConfigError(f"ion {ion} outside chain of {trap['ions']}", "addressing.ion")
    if len(addressing["rotation_rad"]) != 3:
        raise ConfigError("rotation vector needs 3 components", "addressing.rotation_rad")

    run = config["run"]
    if run["nbar0_source"] not in ("doppler", "explicit"):
        raise ConfigError("must be 'doppler' or 'explicit'", "run.nbar0_source")
    if run["nbar0_source"] == "explicit" and (run["nbar0"] is None or run["nbar0"] < 0):
        raise ConfigError("explicit n̄₀ must be given and non-negative", "run.nbar0")
    if run["heating_rate_per_s"] < 0:
        raise ConfigError("must be non-negative", "run.heating_rate_per_s")
    if (run["delay_grid_s"] is None) == (run["nbar_grid"] is None):
        raise ConfigError("exactly one of delay_grid_s and nbar_grid is required", "run")
    if run["phase_error_model"] not in ("progressive", "constant"):
        raise ConfigError("must be 'progressive' or 'constant'", "run.phase_error_model")
    tail = run["tolerances"]["thermal_tail"]
    if not 0 < tail < 1:
        raise ConfigError("must lie in (0, 1)", "run.tolerances.thermal_tail")

    truncation = config["truncation"]
    if not 0 <= truncation["threshold"] < 1:
        raise ConfigError("must lie in [0, 1)", "truncation.threshold")
    if int(truncation["n_ions_max"]) < 1:
        raise ConfigError("must be at least 1", "truncation.n_ions_max")
    if not truncation["scenarios"]:
        raise ConfigError("at least one scenario is required", "truncation.scenarios")
    for i, entry in enumerate(truncation["scenarios"]):
        missing = [k for k in ("name", "axial", "horizontal", "vertical") if k not in entry]
        if missing:
            raise ConfigError(f"missing {missing[0]!r}", f"truncation.scenarios[{i}]")
    if config["fit"]["max_nbar"] <= 0:
        raise ConfigError("must be positive", "fit.max_nbar")
    return config


def load_scenario(path: str) -> dict:
    """
    Load a scenario file, falling back to defaults for every key it omits.

    Args:
        path: JSON file, or a bare name resolved inside the scenarios folder

    Returns:
        dict: Merged and validated scenario
    """
    if not os.path.exists(path) and os.path.exists(os.path.join(SCENARIO_DIR, path + ".json")):
        path = os.path.join(SCENARIO_DIR, path + ".json")
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read scenario: {e.strerror}", path) from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON at line {e.lineno}: {e.msg}", path) from None
    config = validate_scenario(_merge(DEFAULT_SCENARIO, raw, ""))
    logger.debug("loaded scenario %s (%s)", config["name"], path)
    return config


def scenario_from_dict(raw: dict) -> dict:
    """Merge and validate an in-memory scenario."""
    return validate_scenario(_merge(DEFAULT_SCENARIO, raw, ""))


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical (sorted-key) JSON of a merged scenario."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def save_scenario(config: dict, path: str) -> None:
    """Write a scenario back to disk in its canonical form."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config, f, indent=2, sort_keys=True)
