"""Propagation of the qubit + damped-mode master equation with Zeno measurements.

Between measurements the state obeys

    d rho/dt = -i[H, rho] - gamma (a^dag a rho + rho a^dag a - 2 a rho a^dag)

and at each measurement instant a selective projection (trace-decreasing) or a
non-selective qubit measurement (trace-preserving) is applied. The state is
never renormalized, so its trace is the joint survival probability.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import IntegratorError, TruncationError
from .model import (
    DensityMatrix,
    HilbertConfig,
    ModelParams,
    OperatorSet,
    QubitState,
    build_operators,
    initial_state,
)

log = logging.getLogger(__name__)

TRUNCATION_THRESHOLD = 1e-8
MAX_N_MAX = 128
EXPM_MAX_DIM = 64


class Scheme(str, enum.Enum):
    RK4 = "rk4"
    EXPM = "expm"  # exact Liouvillian exponential; small spaces only, used as a cross-check


class Measurement(str, enum.Enum):
    SELECTIVE = "selective"
    NONSELECTIVE = "nonselective"
    NONE = "none"


class NonselectiveMode(str, enum.Enum):
    DEPHASE = "dephase"
    FACTORIZE = "factorize"


class Frame(str, enum.Enum):
    LAB = "lab"
    ROTATING = "rotating"


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step settings.

    When ``steps_per_interval`` is None the number of steps for a duration ``T``
    is ``max(10, ceil(T * max_rate / step_factor), ceil(T * stiffness / stability))``
    so that ``h * max_rate`` never exceeds ``step_factor`` and the top of the Fock
    ladder stays inside the RK4 stability region. ``refine`` multiplies the step
    count (used by step-halving checks).
    """

    scheme: Scheme = Scheme.RK4
    steps_per_interval: int | None = None
    step_factor: float = 0.025
    stability: float = 1.0
    convergence_tol: float = 1e-6
    refine: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.steps_per_interval is not None and self.steps_per_interval < 10:
            raise ValueError("steps_per_interval must be >= 10")
        if not 0 < self.step_factor <= 0.05:
            raise ValueError("step_factor must lie in (0, 0.05]")
        if self.refine < 1:
            raise ValueError("refine must be >= 1")

    def n_steps(self, duration: float, params: ModelParams, stiffness: float = 0.0) -> int:
        if self.steps_per_interval is not None:
            base = self.steps_per_interval
        else:
            base = max(10, math.ceil(duration * params.max_rate / self.step_factor - 1e-9),
                       math.ceil(duration * stiffness / self.stability - 1e-9))
        return base * self.refine

    def halved(self) -> "IntegratorConfig":
        return replace(self, refine=2 * self.refine)


@dataclass(frozen=True)
class ZenoProtocol:
    """Measurement schedule: optional free evolution, then ``n_meas`` measurements spaced ``tau``.

    ``target`` is the state the selective measurement projects onto (defaults to the
    initial qubit state). In the rotating frame the projector follows the free
    qubit precession, i.e. the measurement is made in the interaction picture.
    """

    tau: float
    n_meas: int
    measurement: Measurement = Measurement.SELECTIVE
    target: QubitState | None = None
    pre_evolution_time: float = 0.0
    frame: Frame = Frame.LAB
    nonselective_mode: NonselectiveMode = NonselectiveMode.DEPHASE

    def __post_init__(self):
        object.__setattr__(self, "measurement", Measurement(self.measurement))
        object.__setattr__(self, "frame", Frame(self.frame))
        object.__setattr__(self, "nonselective_mode", NonselectiveMode(self.nonselective_mode))
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.n_meas < 0 or int(self.n_meas) != self.n_meas:
            raise ValueError(f"n_meas must be a non-negative integer, got {self.n_meas}")
        if self.pre_evolution_time < 0:
            raise ValueError("pre_evolution_time must be >= 0")

    @property
    def total_time(self) -> float:
        return self.pre_evolution_time + self.n_meas * self.tau


@dataclass
class SurvivalSeries:
    tau: float
    times: np.ndarray
    probs: np.ndarray
    params: ModelParams
    n_max: int
    converged: bool
    protocol: ZenoProtocol | None = None
    top_population: float = 0.0
    # sampled (t, rho_ee, trace) between measurements; empty unless requested.
    # Measurement times appear twice, before and after the projection.
    trajectory: dict = field(default_factory=dict)

    @property
    def n_meas(self) -> int:
        return len(self.probs) - 1


def _check_dims(rho: DensityMatrix, ops: OperatorSet):
    if rho.dim != ops.dim:
        raise ValueError(f"dimension mismatch: state {rho.dim} vs operators {ops.dim}")


def lindblad_rhs(rho: DensityMatrix, ops: OperatorSet, gamma: float | None = None) -> DensityMatrix:
    """Generator of the master equation applied to ``rho``."""
    _check_dims(rho, ops)
    if gamma is None:
        gamma = ops.params.gamma
    r = rho.data
    out = -1j * (ops.h @ r - r @ ops.h)
    out -= gamma * (ops.num @ r + r @ ops.num - 2.0 * ops.a @ r @ ops.a_dag)
    return DensityMatrix(out, rho.n_max)


class _Propagator:
    """Fixed-step RK4 for ``d rho/dt = A rho + rho A^dag + 2 gamma a rho a^dag`` with A = -i H_eff."""

    def __init__(self, ops: OperatorSet):
        self.A = np.ascontiguousarray(-1j * ops.h_eff)
        self.a = np.ascontiguousarray(ops.a)
        self.a_dag = np.ascontiguousarray(ops.a_dag)
        self.jump = 2.0 * ops.params.gamma

    def rhs(self, r: np.ndarray) -> np.ndarray:
        x = self.A @ r
        out = x + x.conj().T  # valid for Hermitian r; every RK4 stage stays Hermitian
        if self.jump:
            out += self.jump * (self.a @ r @ self.a_dag)
        return out

    def run(self, r: np.ndarray, h: float, steps: int, observer=None, t0: float = 0.0,
            sample_every: int = 0, t_end: float | None = None) -> np.ndarray:
        f = self.rhs
        for i in range(steps):
            k1 = f(r)
            k2 = f(r + (0.5 * h) * k1)
            k3 = f(r + (0.5 * h) * k2)
            k4 = f(r + h * k3)
            r = r + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            r = 0.5 * (r + r.conj().T)
            if observer is not None and sample_every and (i + 1) % sample_every == 0:
                t = t_end if i + 1 == steps and t_end is not None else t0 + (i + 1) * h
                observer(t, r)
        if not np.all(np.isfinite(r)):
            raise IntegratorError("non-finite entries in density matrix after RK4 propagation "
                                  f"(h={h:g}, steps={steps}); reduce the step size")
        return r


def liouvillian(ops: OperatorSet) -> np.ndarray:
    """Superoperator acting on row-major ``vec(rho)``."""
    d = ops.dim
    eye = np.eye(d)
    A = -1j * ops.h_eff
    L = np.kron(A, eye) + np.kron(eye, A.conj())
    L += 2.0 * ops.params.gamma * np.kron(ops.a, ops.a.conj())
    return L


@lru_cache(maxsize=64)
def _expm_cached(params: ModelParams, n_max: int, duration: float) -> np.ndarray:
    ops = build_operators(params, HilbertConfig(n_max))
    return scipy.linalg.expm(liouvillian(ops) * duration)


def evolve(rho: DensityMatrix, duration: float, ops: OperatorSet,
           cfg: IntegratorConfig | None = None, observer=None, t0: float = 0.0,
           samples: int = 0) -> DensityMatrix:
    """Propagate ``rho`` by ``duration`` without measurement.

    ``observer(t, data)`` is called ``samples`` times at evenly spaced grid points
    (RK4 only); the step count is rounded up to a multiple of ``samples``.
    """
    _check_dims(rho, ops)
    if duration < 0:
        raise ValueError("duration must be >= 0")
    cfg = cfg or IntegratorConfig()
    if duration == 0:
        return rho.copy()
    if cfg.scheme is Scheme.EXPM:
        if ops.dim > EXPM_MAX_DIM:
            raise ValueError(f"expm scheme limited to dim <= {EXPM_MAX_DIM}")
        U = _expm_cached(ops.params, rho.n_max, float(duration))
        out = (U @ rho.data.reshape(-1)).reshape(rho.dim, rho.dim)
        out = 0.5 * (out + out.conj().T)
        if observer is not None and samples:
            observer(t0 + duration, out)
        return DensityMatrix(out, rho.n_max)
    steps = cfg.n_steps(duration, ops.params, ops.stiffness)
    every = 0
    if samples:
        every = math.ceil(steps / samples)
        steps = every * samples
    h = duration / steps
    prop = _Propagator(ops)
    out = prop.run(rho.data, h, steps, observer, t0, every, t0 + duration)
    return DensityMatrix(out, rho.n_max)


def selective_measure(rho: DensityMatrix, psi: QubitState) -> DensityMatrix:
    """``(P (x) I) rho (P (x) I)`` with ``P = |psi><psi|``; not renormalized."""
    blocks = rho.qubit_blocks()
    v = psi.vector
    mode_block = np.einsum("i,injm,j->nm", v.conj(), blocks, v)
    out = np.einsum("ij,nm->injm", psi.projector, mode_block)
    return DensityMatrix(out.reshape(rho.dim, rho.dim), rho.n_max)


def nonselective_measure(rho: DensityMatrix,
                         mode: NonselectiveMode = NonselectiveMode.DEPHASE) -> DensityMatrix:
    """Outcome-averaged sigma_z measurement.

    ``dephase`` keeps the qubit-diagonal blocks (``P_e rho P_e + P_g rho P_g``);
    ``factorize`` additionally replaces the state by ``diag(rho_S) (x) rho_A / Tr rho``.
    """
    mode = NonselectiveMode(mode)
    blocks = rho.qubit_blocks().copy()
    if mode is NonselectiveMode.DEPHASE:
        blocks[0, :, 1, :] = 0.0
        blocks[1, :, 0, :] = 0.0
        return DensityMatrix(blocks.reshape(rho.dim, rho.dim), rho.n_max)
    tr = rho.trace()
    pops = np.real(np.einsum("inin->i", blocks))
    mode_state = np.einsum("qnqm->nm", blocks)
    out = np.einsum("ij,nm->injm", np.diag(pops).astype(complex), mode_state / tr)
    return DensityMatrix(out.reshape(rho.dim, rho.dim), rho.n_max)


def top_population(rho: DensityMatrix, levels: int = 2) -> float:
    """Relative population of the highest ``levels`` Fock states."""
    pops = rho.fock_populations()
    tr = pops.sum()
    if tr <= 0:
        return 0.0
    return float(pops[-levels:].sum() / tr)


def _run_fixed(params: ModelParams, psi: QubitState, protocol: ZenoProtocol,
               cfg: IntegratorConfig, n_max: int, samples_per_interval: int):
    hcfg = HilbertConfig(n_max)
    ops = build_operators(params, hcfg)
    rho = initial_state(psi, hcfg)
    target = protocol.target or psi
    t0 = protocol.pre_evolution_time
    worst = 0.0

    traj_t, traj_ee, traj_tr = [], [], []
    n = hcfg.n_levels

    def observer(t, r):
        traj_t.append(t)
        traj_ee.append(float(np.real(np.trace(r[:n, :n]))))
        traj_tr.append(float(np.real(np.trace(r))))

    obs = observer if samples_per_interval else None
    if obs:
        observer(0.0, rho.data)
    if t0 > 0:
        pre_samples = samples_per_interval * max(1, round(t0 / protocol.tau))
        rho = evolve(rho, t0, ops, cfg, obs, 0.0, pre_samples)
        worst = max(worst, top_population(rho))

    probs = [rho.trace()]
    times = [t0]
    for k in range(1, protocol.n_meas + 1):
        start = t0 + (k - 1) * protocol.tau
        rho = evolve(rho, protocol.tau, ops, cfg, obs, start, samples_per_interval)
        t = start + protocol.tau
        worst = max(worst, top_population(rho))
        if protocol.measurement is Measurement.SELECTIVE:
            proj = target.rotated(t, params.delta) if protocol.frame is Frame.ROTATING else target
            rho = selective_measure(rho, proj)
        elif protocol.measurement is Measurement.NONSELECTIVE:
            rho = nonselective_measure(rho, protocol.nonselective_mode)
        if obs:
            observer(t, rho.data)
        probs.append(rho.trace())
        times.append(t)
    trajectory = {}
    if obs:
        trajectory = {"t": np.array(traj_t), "rho_ee": np.array(traj_ee), "trace": np.array(traj_tr)}
    return np.array(times), np.array(probs), worst, trajectory


def run_zeno(params: ModelParams, psi: QubitState, protocol: ZenoProtocol,
             cfg: IntegratorConfig | None = None, n_max: int = 12, adaptive: bool = True,
             samples_per_interval: int = 0) -> SurvivalSeries:
    """Alternate free evolution and measurement, recording the trace after each measurement.

    With ``adaptive`` the Fock truncation grows by 50% while the top two levels hold
    more than ``TRUNCATION_THRESHOLD`` of the population at any checkpoint.
    """
    cfg = cfg or IntegratorConfig()
    HilbertConfig(n_max)
    while True:
        times, probs, worst, traj = _run_fixed(params, psi, protocol, cfg, n_max,
                                               samples_per_interval)
        ok = worst <= TRUNCATION_THRESHOLD
        if ok or not adaptive:
            break
        new = max(n_max + 1, math.ceil(1.5 * n_max))
        if new > MAX_N_MAX:
            raise TruncationError(
                f"Fock truncation not converged at n_max={n_max}: top-level population "
                f"{worst:.3e} > {TRUNCATION_THRESHOLD:g}", n_max, worst)
        log.debug("growing n_max %d -> %d (top population %.2e)", n_max, new, worst)
        n_max = new
    probs = probs.copy()
    if probs[0] != 1.0 and abs(probs[0] - 1.0) < 1e-9:
        probs[0] = 1.0
    return SurvivalSeries(protocol.tau, times, probs, params, n_max, ok, protocol, worst, traj)
