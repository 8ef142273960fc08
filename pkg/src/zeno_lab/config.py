"""Experiment configuration: a flat YAML (or JSON) mapping.

Keys (all optional except where a subcommand needs them)::

    delta, omega0, g, gamma      model constants (angular units, hbar = 1)
    variant                      rabi | jc
    state                        e | g | 3-4 | 4-3 | 0.8-0.6 | 3-4-phase-pi8
                                 or [alpha_re, alpha_im, beta_re, beta_im]
    target                       selective-measurement target (same forms); default: state
    tau, n                       Zeno interval and number of measurements
    measurement                  selective | nonselective | none
    pre_evolution_time           free evolution before the first measurement
    frame                        lab | rotating (projector follows free precession)
    nonselective_mode            dephase | factorize
    scheme                       rk4 | expm
    steps_per_interval           fixed RK4 step count per interval (>= 10), or null
    step_factor                  max h * max(delta, omega0, g, gamma) when automatic
    convergence_tol              tolerance for step-halving / n_max-doubling checks
    n_max, adaptive              Fock truncation and adaptive growth
    taus                         sweep grid: list, or {min, max, points, spacing: log|linear}
    n_list                       measurement counts for sweeps
    rate_reset                   restart rate-equation clocks at each measurement
    samples_per_interval         trajectory samples per interval (compare-rate, figures)
    t_max                        trajectory length for measurement-free comparisons
"""

from __future__ import annotations

import math
from typing import Any, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from .dynamics import IntegratorConfig, ZenoProtocol
from .errors import ConfigError
from .model import ModelParams, QubitState

STATE_PRESETS = {
    "e": (1.0, 0.0, 0.0, 0.0),
    "g": (0.0, 0.0, 1.0, 0.0),
    "3-4": (0.6, 0.0, 0.8, 0.0),
    "4-3": (0.8, 0.0, 0.6, 0.0),
    "0.8-0.6": (0.8, 0.0, 0.6, 0.0),
    "3-4-phase-pi8": (0.6, 0.0, 0.8 * math.cos(math.pi / 8), 0.8 * math.sin(math.pi / 8)),
}

StateSpec = tuple[float, float, float, float]


def resolve_state(value) -> StateSpec:
    if isinstance(value, str):
        key = value.strip().lower()
        if key not in STATE_PRESETS:
            raise ValueError(f"unknown state preset {value!r}; known: {sorted(STATE_PRESETS)}")
        return STATE_PRESETS[key]
    if isinstance(value, dict):
        value = [value.get(k, 0.0) for k in ("alpha_re", "alpha_im", "beta_re", "beta_im")]
    vals = tuple(float(v) for v in value)
    if len(vals) != 4:
        raise ValueError("state must have four components [alpha_re, alpha_im, beta_re, beta_im]")
    norm = vals[0] ** 2 + vals[1] ** 2 + vals[2] ** 2 + vals[3] ** 2
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"state not normalized: |alpha|^2 + |beta|^2 = {norm:.12g}")
    return vals


def state_from_spec(spec: StateSpec) -> QubitState:
    a = complex(spec[0], spec[1])
    b = complex(spec[2], spec[3])
    # inputs are checked to 1e-9; renormalize so QubitState's 1e-12 check holds
    return QubitState.normalized(a, b)


class TauGrid(BaseModel):
    model_config = ConfigDict(extra="forbid")

    min: float = 0.05
    max: float = 6.0
    points: int = 60
    spacing: Literal["log", "linear"] = "log"

    def values(self, delta: float = 1.0) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.min, self.max, self.points) / delta
        return np.linspace(self.min, self.max, self.points) / delta


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    delta: float = 1.0
    omega0: float = 1.0
    g: float = 0.1
    gamma: float = 0.1
    variant: Literal["rabi", "jc"] = "rabi"

    state: StateSpec = STATE_PRESETS["e"]
    target: Optional[StateSpec] = None

    tau: float = 1.0
    n: int = 16
    measurement: Literal["selective", "nonselective", "none"] = "selective"
    pre_evolution_time: float = 0.0
    frame: Literal["lab", "rotating"] = "lab"
    nonselective_mode: Literal["dephase", "factorize"] = "dephase"

    scheme: Literal["rk4", "expm"] = "rk4"
    steps_per_interval: Optional[int] = None
    step_factor: float = 0.025
    convergence_tol: float = 1e-6

    n_max: int = 12
    adaptive: bool = True

    taus: Union[list[float], TauGrid] = TauGrid()
    n_list: list[int] = [1, 2, 4, 8, 16]

    rate_reset: bool = True
    samples_per_interval: int = 20
    t_max: float = 30.0

    @field_validator("state", mode="before")
    @classmethod
    def _state(cls, v):
        return resolve_state(v)

    @field_validator("target", mode="before")
    @classmethod
    def _target(cls, v):
        return None if v is None else resolve_state(v)

    @field_validator("variant", "measurement", "frame", "nonselective_mode", "scheme", mode="before")
    @classmethod
    def _lower(cls, v):
        return v.lower() if isinstance(v, str) else v

    @field_validator("delta", "omega0", "tau")
    @classmethod
    def _positive(cls, v):
        if not v > 0:
            raise ValueError("must be > 0")
        return v

    @field_validator("g", "gamma", "pre_evolution_time")
    @classmethod
    def _nonnegative(cls, v):
        if not v >= 0:
            raise ValueError("must be >= 0")
        return v

    @field_validator("n")
    @classmethod
    def _count(cls, v):
        if v < 0:
            raise ValueError("must be >= 0")
        return v

    @field_validator("n_max")
    @classmethod
    def _nmax(cls, v):
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @field_validator("steps_per_interval")
    @classmethod
    def _steps(cls, v):
        if v is not None and v < 10:
            raise ValueError("must be >= 10")
        return v

    @field_validator("step_factor")
    @classmethod
    def _factor(cls, v):
        if not 0 < v <= 0.05:
            raise ValueError("must lie in (0, 0.05]")
        return v

    @field_validator("n_list")
    @classmethod
    def _nlist(cls, v):
        if not v or min(v) < 1:
            raise ValueError("must be a non-empty list of positive integers")
        return sorted(set(v))

    # --- conversions ---------------------------------------------------------

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.delta, self.omega0, self.g, self.gamma, self.variant)

    @property
    def psi(self) -> QubitState:
        return state_from_spec(self.state)

    @property
    def target_state(self) -> QubitState | None:
        return None if self.target is None else state_from_spec(self.target)

    @property
    def protocol(self) -> ZenoProtocol:
        return ZenoProtocol(self.tau, self.n, self.measurement, self.target_state,
                            self.pre_evolution_time, self.frame, self.nonselective_mode)

    @property
    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(self.scheme, self.steps_per_interval, self.step_factor,
                                convergence_tol=self.convergence_tol)

    def tau_grid(self) -> np.ndarray:
        if isinstance(self.taus, TauGrid):
            return self.taus.values(self.delta)
        return np.asarray(sorted(self.taus), dtype=float)

    def canonical(self) -> dict[str, Any]:
        """Plain-data form; ``parse_config(dump_config(c)) == c``."""
        data = self.model_dump(mode="python")
        data["state"] = list(self.state)
        data["target"] = None if self.target is None else list(self.target)
        if isinstance(self.taus, TauGrid):
            data["taus"] = self.taus.model_dump()
        return data


def _key_lines(text: str) -> dict[str, int]:
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    if not isinstance(node, yaml.MappingNode):
        return {}
    return {k.value: k.start_mark.line + 1 for k, _ in node.value if isinstance(k, yaml.ScalarNode)}


def parse_config(text: str, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    """Parse and validate a YAML/JSON document; unknown keys are rejected."""
    try:
        data = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a key-value mapping")
    if overrides:
        data.update(overrides)
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        lines = _key_lines(text)
        msgs = []
        for err in exc.errors():
            field = ".".join(str(p) for p in err["loc"]) or "<root>"
            root = str(err["loc"][0]) if err["loc"] else ""
            where = f"line {lines[root]}: " if root in lines else ""
            msg = "unknown key" if err["type"] == "extra_forbidden" else err["msg"]
            msgs.append(f"{where}{field}: {msg}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(msgs)) from None


def load_config(path: str | None, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    text = ""
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    return parse_config(text, overrides)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.canonical(), sort_keys=True)


def parse_override(item: str) -> tuple[str, Any]:
    if "=" not in item:
        raise ConfigError(f"--set expects key=value, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        value = raw
    return key.strip(), value

