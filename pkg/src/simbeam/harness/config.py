"""
Experiment configuration: a flat ``key = value`` text file.

Blank lines and ``#`` comments are ignored. Lists are comma separated.
Keys map onto :class:`SimLayoutConfig`, :class:`Environment` and the
solver options; unknown keys are rejected with their line number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from ..channel import Environment
from ..geometry import LayoutError, SimLayoutConfig
from ..phaseopt import GaOptions
from ..powerctl import IwfOptions
from ..optimizer import ZF_NORMALIZATIONS, AoOptions

SWEEP_AXES = ("L", "N", "b", "K", "P_T")
SOLVERS = ("sr", "pga", "pga-cont", "codebook", "zf", "quantized", "avg-sr", "avg-pga")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


def _optional_float(text):
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


def _float_list(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _str_list(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


_LAYOUT_KEYS = {
    "M": int, "K": int, "L": int, "Nx": int, "Ny": int, "carrier_freq": float,
    "sim_thickness": _optional_float, "element_size": _optional_float,
    "antenna_spacing": _optional_float, "atom_spacing": _optional_float,
}
_ENV_KEYS = {
    "tx_power_dbm": float, "noise_dbm": float, "pathloss_exp": float, "bs_height": float,
    "ue_spacing": float, "bs_gain_dbi": float, "ue_gain_dbi": float, "c0_db": _optional_float,
    "d0": float, "bandwidth_hz": float,
}
_RUN_KEYS = {
    "methods": _str_list, "bits": int, "sweep_axis": str, "sweep_values": _float_list,
    "trials": int, "seed": int, "output": str, "codebook_size": int, "workers": int,
    "zeta": _optional_float, "iwf_tol": float, "iwf_max_iter": int,
    "ao_tol": float, "ao_max_iter": int, "sr_tol": float, "sr_max_iter": int,
    "ga_step0": float, "ga_shrink": float, "ga_armijo_c": float, "ga_max_backtracks": int,
    "ga_tol": float, "ga_max_iter": int, "ga_restarts": int, "zf_normalization": str,
}


@dataclass(frozen=True)
class ExperimentConfig:
    layout: SimLayoutConfig = field(default_factory=SimLayoutConfig)
    env: Environment = field(default_factory=Environment)
    methods: tuple = ("sr",)
    bits: int = 2
    sweep_axis: str = "L"
    sweep_values: tuple = (7.0,)
    trials: int = 100
    seed: int = 0
    output: str = "results.csv"
    codebook_size: int | None = None
    workers: int = 1
    zeta: float | None = None
    iwf_tol: float = 1e-6
    iwf_max_iter: int = 100
    ao_tol: float = 1e-6
    ao_max_iter: int = 100
    sr_tol: float = 1e-6
    sr_max_iter: int = 100
    ga_step0: float = 1.0
    ga_shrink: float = 0.5
    ga_armijo_c: float = 1e-4
    ga_max_backtracks: int = 100
    ga_tol: float = 1e-6
    ga_max_iter: int = 100
    ga_restarts: int = 1
    zf_normalization: str = "column"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError(f"trials: must be >= 1, got {self.trials}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed: must be an unsigned 64-bit integer, got {self.seed}")
        if self.bits < 1:
            raise ConfigError(f"bits: must be >= 1, got {self.bits}")
        if self.sweep_axis not in SWEEP_AXES:
            raise ConfigError(f"sweep_axis: must be one of {SWEEP_AXES}, got {self.sweep_axis!r}")
        if not self.sweep_values:
            raise ConfigError("sweep_values: at least one value is required")
        for m in self.methods:
            if m not in SOLVERS:
                raise ConfigError(f"methods: unknown method {m!r}; expected one of {SOLVERS}")
        if not self.methods:
            raise ConfigError("methods: at least one method is required")
        if self.zf_normalization not in ZF_NORMALIZATIONS:
            raise ConfigError(f"zf_normalization: must be one of {ZF_NORMALIZATIONS}, got {self.zf_normalization!r}")
        if self.workers < 1:
            raise ConfigError(f"workers: must be >= 1, got {self.workers}")
        if self.codebook_size is not None and self.codebook_size < 1:
            raise ConfigError(f"codebook_size: must be >= 1, got {self.codebook_size}")
        for v in self.sweep_values:
            self._check_sweep_value(v)
        try:
            iwf = self.ao_options().iwf
        except ValueError as exc:
            raise ConfigError(f"solver options: {exc}") from exc
        for v in self.sweep_values:
            try:
                iwf.damping(self.at(v)[0].K)
            except ValueError as exc:
                raise ConfigError(f"zeta: {exc}") from exc

    def _check_sweep_value(self, v):
        axis = self.sweep_axis
        if axis == "P_T":
            if not math.isfinite(v):
                raise ConfigError(f"sweep_values: P_T must be finite, got {v}")
            return
        if v != int(v) or v < 1:
            raise ConfigError(f"sweep_values: {axis} values must be positive integers, got {v}")
        if axis == "N" and math.isqrt(int(v)) ** 2 != int(v):
            raise ConfigError(f"sweep_values: N must be a perfect square (square metasurfaces), got {int(v)}")

    def at(self, value):
        """Layout, environment and codebook resolution for one sweep value."""
        layout, env, bits = self.layout, self.env, self.bits
        axis = self.sweep_axis
        try:
            if axis == "L":
                layout = replace(layout, L=int(value))
            elif axis == "N":
                side = math.isqrt(int(value))
                layout = replace(layout, Nx=side, Ny=side)
            elif axis == "K":
                layout = replace(layout, K=int(value), M=int(value))
            elif axis == "b":
                bits = int(value)
            else:
                env = replace(env, tx_power_dbm=float(value))
        except LayoutError as exc:
            raise ConfigError(f"sweep_values: {exc}") from exc
        return layout, env, bits

    def ao_options(self, bits=None) -> AoOptions:
        return AoOptions(
            bits=self.bits if bits is None else bits,
            tol=self.ao_tol,
            max_iter=self.ao_max_iter,
            iwf=IwfOptions(zeta=self.zeta, tol=self.iwf_tol, max_iter=self.iwf_max_iter),
            ga=GaOptions(step0=self.ga_step0, shrink=self.ga_shrink, armijo_c=self.ga_armijo_c,
                         max_backtracks=self.ga_max_backtracks, tol=self.ga_tol,
                         max_iter=self.ga_max_iter, restarts=self.ga_restarts),
            sr_tol=self.sr_tol,
            sr_max_iter=self.sr_max_iter,
        )


def parse_pairs(text, source="<config>"):
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _LAYOUT_KEYS and key not in _ENV_KEYS and key not in _RUN_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        pairs[key] = value
    return pairs


def build_config(pairs: dict, overrides: dict | None = None) -> ExperimentConfig:
    """Assemble a config from string pairs; ``overrides`` (already typed) win."""
    layout, env, run = {}, {}, {}
    for key, text in pairs.items():
        for table, target in ((_LAYOUT_KEYS, layout), (_ENV_KEYS, env), (_RUN_KEYS, run)):
            if key in table:
                try:
                    target[key] = table[key](text)
                except ValueError as exc:
                    raise ConfigError(f"{key}: cannot parse {text!r} ({exc})") from exc
    if "K" in layout and "M" not in layout:
        layout["M"] = layout["K"]
    for key, value in (overrides or {}).items():
        if value is not None:
            run[key] = value
    try:
        return ExperimentConfig(layout=SimLayoutConfig(**layout), env=Environment(**env), **run)
    except LayoutError as exc:
        raise ConfigError(f"layout: {exc}") from exc


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    pairs = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            pairs = parse_pairs(fh.read(), str(path))
    return build_config(pairs, overrides)
