"""JSON experiment configuration.

All physical quantities carry their unit in the field name and are given in
ordinary frequency (MHz, kHz, Hz); conversion to rad/s happens here, at the
boundary. Unknown keys are rejected so that a typo cannot silently fall back
to a default.

Schema (every section and field is optional unless the experiment needs it)::

    {
      "experiment": "bell",
      "seed": 7,
      "constants": {"rabi_mhz": 0.763, "zeeman_split_mhz": 7.8, "larmor_khz": 3.09,
                    "rf_rabi_hz": 161.7, "blockade_mhz": null, "c6_thz_um6": null,
                    "spacing_um": null, "light_shift_mhz": null},
      "noise": {"ryd_decay_rate_per_s": 0, "ryd_dephasing_rate_per_s": 0,
                "raman_rate_per_s": 0, "atom_loss": 0, "decay_branching": 0.5,
                "trap_shift_ratio": null, "field_gradient_hz_per_um": null},
      "readout": {"pi_pulse_error": 0, "n_rounds": 3, "imaging_error": 0,
                  "raman_scatter_error": 0, "false_bright": 0, "atom_loss": 0},
      "sweep": {"parameter": "time_us", "start": 0, "stop": 2.0, "steps": 41},
      "options": {...experiment specific...},
      "output": {"dir": null, "format": "csv"}
    }
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from .gates import GATE_RABI, LARMOR, RF_RABI, ZEEMAN_SPLIT, NoiseModel
from .readout import ReadoutModel

TWO_PI = 2 * math.pi
EXPERIMENTS = (
    "gate-dynamics", "bell", "parity", "suppressed-gate", "rabi",
    "ramsey", "echo", "t1", "blowout", "rb",
)
#: Experiments that draw random numbers and therefore require a seed.
SAMPLED = ("ramsey", "echo", "t1", "rb")


class ConfigError(ValueError):
    """Malformed configuration or command-line input (exit code 2)."""


@dataclass(frozen=True)
class Constants:
    rabi_mhz: float = GATE_RABI / TWO_PI / 1e6
    zeeman_split_mhz: float = ZEEMAN_SPLIT / TWO_PI / 1e6
    larmor_khz: float = LARMOR / TWO_PI / 1e3
    rf_rabi_hz: float = RF_RABI / TWO_PI
    blockade_mhz: Optional[float] = None
    c6_thz_um6: Optional[float] = None
    spacing_um: Optional[float] = None
    light_shift_mhz: Optional[float] = None

    @property
    def rabi(self) -> float:
        return TWO_PI * 1e6 * self.rabi_mhz

    @property
    def zeeman_split(self) -> float:
        return TWO_PI * 1e6 * self.zeeman_split_mhz

    @property
    def larmor(self) -> float:
        return TWO_PI * 1e3 * self.larmor_khz

    @property
    def rf_rabi(self) -> float:
        return TWO_PI * self.rf_rabi_hz

    @property
    def light_shift(self) -> float:
        """Rydberg light shift in rad/s; zero when unset."""
        return TWO_PI * 1e6 * (self.light_shift_mhz or 0.0)

    @property
    def blockade(self) -> float:
        """Interaction V in rad/s; infinite (perfect blockade) unless configured."""
        if self.blockade_mhz is not None:
            return TWO_PI * 1e6 * self.blockade_mhz
        if self.c6_thz_um6 is not None and self.spacing_um is not None:
            return TWO_PI * 1e12 * self.c6_thz_um6 / self.spacing_um**6
        return math.inf


@dataclass(frozen=True)
class Sweep:
    parameter: str
    start: float
    stop: float
    steps: int

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


_NOISE_FIELDS = {
    "ryd_decay_rate_per_s": "ryd_decay_rate",
    "ryd_dephasing_rate_per_s": "ryd_dephasing_rate",
    "raman_rate_per_s": "raman_rate",
    "atom_loss": "atom_loss",
    "decay_branching": "decay_branching",
    "trap_shift_ratio": "trap_shift_ratio",
    "field_gradient_hz_per_um": "field_gradient",
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: Optional[int] = None
    constants: Constants = field(default_factory=Constants)
    noise: Optional[NoiseModel] = None
    readout: Optional[ReadoutModel] = None
    sweep: Optional[Sweep] = None
    options: dict = field(default_factory=dict)
    output_dir: Optional[str] = None
    output_format: str = "csv"

    def require_seed(self) -> int:
        if self.seed is None:
            raise ConfigError(f"experiment {self.experiment!r} samples random numbers and needs a seed")
        return self.seed

    def option(self, name: str, default: Any = None) -> Any:
        return self.options.get(name, default)


def _section(raw: dict, name: str, allowed) -> dict:
    sec = raw.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{name!r} must be an object")
    unknown = sorted(set(sec) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown field(s) in {name!r}: {', '.join(unknown)}")
    return sec


def config_from_dict(raw: dict, experiment: Optional[str] = None) -> ExperimentConfig:
    """Validate and convert a parsed JSON config."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    top = {"experiment", "seed", "constants", "noise", "readout", "sweep", "options", "output"}
    unknown = sorted(set(raw) - top)
    if unknown:
        raise ConfigError(f"unknown top-level field(s): {', '.join(unknown)}")
    name = experiment or raw.get("experiment")
    if name is None:
        raise ConfigError("config does not name an experiment")
    seed = raw.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        raise ConfigError("seed must be a non-negative integer")
    try:
        consts = Constants(**_section(raw, "constants", [f.name for f in fields(Constants)]))
        if consts.rabi_mhz <= 0:
            raise ConfigError("constants.rabi_mhz must be > 0")
        noise_raw = _section(raw, "noise", _NOISE_FIELDS)
        noise = NoiseModel(**{_NOISE_FIELDS[k]: v for k, v in noise_raw.items()}) if "noise" in raw else None
        readout_raw = _section(raw, "readout", [f.name for f in fields(ReadoutModel)])
        readout = ReadoutModel(**readout_raw) if "readout" in raw else None
        sweep_raw = _section(raw, "sweep", ("parameter", "start", "stop", "steps"))
        sweep = None
        if sweep_raw:
            sweep = Sweep(str(sweep_raw["parameter"]), float(sweep_raw["start"]), float(sweep_raw["stop"]),
                          int(sweep_raw["steps"]))
            if sweep.steps < 1:
                raise ConfigError("sweep.steps must be >= 1")
        out = _section(raw, "output", ("dir", "format"))
    except (TypeError, KeyError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    options = raw.get("options", {})
    if options is None:
        options = {}
    if not isinstance(options, dict):
        raise ConfigError("'options' must be an object")
    fmt = out.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("output.format must be 'csv' or 'json'")
    return ExperimentConfig(name, seed, consts, noise, readout, sweep, dict(options), out.get("dir"), fmt)


def load_config(path: Union[str, Path], experiment: Optional[str] = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw, experiment)
