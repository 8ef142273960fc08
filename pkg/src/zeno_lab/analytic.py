"""Closed-form and semi-analytic reference quantities.

* RW (Jaynes-Cummings) excited-state amplitude and the survival laws built on it.
* Continuous-measurement limit of the scaled decay rate ``w(t)`` and the
  corresponding survival ``exp(-tau * int_0^t w)``.
* KKA (bath reset after every measurement) rate from the non-Hermitian
  single-mode Hamiltonian.
* Population rate equation with time-dependent rates for a Lorentzian bath.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.linalg

from .dynamics import IntegratorConfig, Scheme, ZenoProtocol
from .errors import IntegratorError
from .model import (
    SIGMA_X,
    SIGMA_Z,
    HilbertConfig,
    ModelParams,
    QubitState,
    Variant,
    build_operators,
    product_vector,
    qubit_expectations,
)


@dataclass(frozen=True)
class RWAnalytic:
    params: ModelParams

    @property
    def _k(self) -> complex:
        p = self.params
        return complex(p.gamma, p.omega0 - p.delta)  # Gamma - i Delta + i omega0

    @property
    def D(self) -> complex:
        return cmath.sqrt(0.25 * self._k ** 2 - self.params.g ** 2)

    def amplitudes(self, D: complex | None = None) -> tuple[complex, complex]:
        D = self.D if D is None else D
        if D == 0:
            raise ZeroDivisionError("degenerate point D = 0")
        r = self._k / (2 * D)
        return 1 + r, 1 - r

    def alpha(self, t, D: complex | None = None):
        D = self.D if D is None else D
        t = np.asarray(t, dtype=float)
        k = self._k
        if abs(D) < 1e-12 * max(1.0, abs(k)):
            # critical damping: limit of A+ e^{Dt} + A- e^{-Dt} as D -> 0
            bracket = 2.0 + k * t
        else:
            ap, am = self.amplitudes(D)
            bracket = ap * np.exp(D * t) + am * np.exp(-D * t)
        return 0.5 * np.exp(-0.5 * k * t) * bracket


def rw_alpha(t, params: ModelParams):
    """Interaction-picture amplitude of |e,0> under the RW coupling, starting from 1."""
    return RWAnalytic(params).alpha(t)


def rw_survival_excited(tau: float, n, params: ModelParams):
    """``|alpha(tau)|^(2n)``: survival of |e> after n projections."""
    p1 = abs(complex(rw_alpha(tau, params))) ** 2
    return p1 ** np.asarray(n, dtype=float)


def rw_first_interval_general(psi: QubitState, tau: float, params: ModelParams) -> float:
    """Survival after the first projection onto ``alpha|e> + beta|g>`` (RW coupling).

    Amplitudes are in the interaction picture, so the projection is onto the
    freely precessing target state.
    """
    a, b = psi.alpha, psi.beta
    a_tau = a * complex(rw_alpha(tau, params))
    b2 = abs(b) ** 2
    return abs(a.conjugate() * a_tau + b2) ** 2 + b2 * (abs(a) ** 2 - abs(a_tau) ** 2)


def eta(t, psi: QubitState, params: ModelParams):
    """Coherent amplitude of the mode in the continuous-measurement limit."""
    sx, _ = qubit_expectations(psi)
    t = np.asarray(t, dtype=float)
    z = complex(params.gamma, params.omega0)
    return params.g * sx * (np.exp(-z * t) - 1.0) / complex(params.omega0, -params.gamma)


def continuous_w(t, psi: QubitState, params: ModelParams):
    """Scaled decay rate ``Var_psi(H_S_eta(t)) + g^2 (1 - <sx>^2)``.

    ``H_S_eta = (Delta/2) sz + g sx (eta + eta*)``; accepts scalar or array ``t``.
    """
    sx, _ = qubit_expectations(psi)
    x = 2.0 * np.real(eta(t, psi, params))
    v = psi.vector
    h = 0.5 * params.delta * SIGMA_Z + params.g * np.multiply.outer(x, SIGMA_X)
    hv = h @ v
    mean = np.real(hv @ v.conj())
    second = np.real(np.sum(np.abs(hv) ** 2, axis=-1))
    return second - mean ** 2 + params.g ** 2 * (1 - sx * sx)


def continuous_w_limit(psi: QubitState, params: ModelParams) -> float:
    """``w(t)`` as ``t -> inf`` (eta replaced by ``-g <sx> / (omega0 - i Gamma)``)."""
    if params.gamma == 0:
        raise ValueError("no long-time limit without damping")
    return float(continuous_w(1e6 / params.gamma, psi, params))


def continuous_survival(t: float, tau: float, psi: QubitState, params: ModelParams) -> float:
    if t == 0:
        return 1.0
    integral, _ = scipy.integrate.quad(lambda s: continuous_w(s, psi, params), 0.0, t,
                                       epsabs=1e-12, epsrel=1e-10, limit=500)
    return math.exp(-tau * integral)


def kka_w_continuous(psi: QubitState, params: ModelParams) -> float:
    _, sz = qubit_expectations(psi)
    return (0.5 * params.delta) ** 2 * (1 - sz * sz) + params.g ** 2


def propagate_nonhermitian(vec: np.ndarray, h_eff: np.ndarray, duration: float,
                           steps: int) -> np.ndarray:
    """RK4 for ``i dv/dt = H_eff v``."""
    A = -1j * h_eff
    h = duration / steps
    v = vec.astype(complex)
    for _ in range(steps):
        k1 = A @ v
        k2 = A @ (v + 0.5 * h * k1)
        k3 = A @ (v + 0.5 * h * k2)
        k4 = A @ (v + h * k3)
        v = v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(v)):
        raise IntegratorError("non-finite amplitudes in non-Hermitian propagation")
    return v


def kka_survival_finite_tau(psi: QubitState, tau: float, params: ModelParams,
                            cfg: IntegratorConfig | None = None, n_max: int = 12) -> float:
    """``|<psi,0| exp(-i H_eff tau) |psi,0>|^2`` with ``H_eff = H - i Gamma a^dag a``."""
    if not tau > 0:
        raise ValueError("tau must be > 0")
    cfg = cfg or IntegratorConfig()
    hcfg = HilbertConfig(n_max)
    ops = build_operators(params, hcfg)
    v0 = product_vector(psi, hcfg)
    if cfg.scheme is Scheme.EXPM:
        v = scipy.linalg.expm(-1j * ops.h_eff * tau) @ v0
    else:
        v = propagate_nonhermitian(v0, ops.h_eff, tau, cfg.n_steps(tau, params, ops.stiffness))
    return float(abs(np.vdot(v0, v)) ** 2)


def kka_w_finite_tau(psi: QubitState, tau: float, params: ModelParams,
                     cfg: IntegratorConfig | None = None, n_max: int = 12) -> float:
    p = kka_survival_finite_tau(psi, tau, params, cfg, n_max)
    return -math.log(p) / tau ** 2


# --- rate equation -----------------------------------------------------------

def lorentzian_g0(omega, params: ModelParams):
    """``G0(w) = g^2 (Gamma/pi) / ((w - w0)^2 + Gamma^2)``."""
    omega = np.asarray(omega, dtype=float)
    return params.g ** 2 * (params.gamma / math.pi) / ((omega - params.omega0) ** 2 + params.gamma ** 2)


def _damped_cos_integral(t, gamma: float, nu: float):
    """``int_0^t cos(nu s) exp(-gamma s) ds``."""
    t = np.asarray(t, dtype=float)
    z = complex(gamma, -nu)
    x = z * t
    small = np.abs(x) < 1e-6
    safe = np.where(small, 1.0, x)
    phi = np.where(small, 1 - x / 2 + x * x / 6, -np.expm1(-safe) / safe)
    return np.real(t * phi)


def rate_excited(t, params: ModelParams):
    """``R_e(t) = 2 int G0(w) sin((w - Delta) t) / (w - Delta) dw`` for the Lorentzian."""
    return 2 * params.g ** 2 * _damped_cos_integral(t, params.gamma, params.omega0 - params.delta)


def rate_ground(t, params: ModelParams):
    """``R_g(t) = 2 int G0(w) sin((w + Delta) t) / (w + Delta) dw`` for the Lorentzian."""
    return 2 * params.g ** 2 * _damped_cos_integral(t, params.gamma, params.omega0 + params.delta)


@dataclass
class RatePopulations:
    t: np.ndarray
    rho_ee: np.ndarray

    @property
    def rho_gg(self) -> np.ndarray:
        return 1.0 - self.rho_ee


def rate_equation_run(params: ModelParams, protocol: ZenoProtocol, t_grid,
                      rho_ee0: float = 0.0, reset: bool = True) -> RatePopulations:
    """Integrate ``d rho_ee/dt = -R_e rho_ee + R_g (1 - rho_ee)``.

    Measurements (at ``pre_evolution_time + k tau``) leave populations unchanged; with
    ``reset`` the rate clocks restart at each of them.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be ascending")
    t_end = float(t_grid[-1]) if t_grid.size else 0.0
    marks = [0.0]
    if protocol.measurement.value != "none":
        marks += [protocol.pre_evolution_time + k * protocol.tau
                  for k in range(1, protocol.n_meas + 1)]
    marks = sorted(set(m for m in marks if m < t_end)) + [t_end]

    out = np.empty_like(t_grid)
    y = rho_ee0
    for start, stop in zip(marks[:-1], marks[1:]):
        origin = start if reset else 0.0

        def f(t, y, origin=origin):
            s = t - origin
            return -rate_excited(s, params) * y + rate_ground(s, params) * (1.0 - y)

        sol = scipy.integrate.solve_ivp(f, (start, stop), [y], method="DOP853",
                                        dense_output=True, rtol=1e-10, atol=1e-12)
        if not sol.success:
            raise IntegratorError(f"rate equation integration failed: {sol.message}")
        sel = (t_grid >= start) & (t_grid <= stop)
        if np.any(sel):
            out[sel] = sol.sol(t_grid[sel])[0]
        y = float(sol.y[0, -1])
    return RatePopulations(t_grid, out)


__all__ = [
    "RWAnalytic", "rw_alpha", "rw_survival_excited", "rw_first_interval_general", "eta",
    "continuous_w", "continuous_w_limit", "continuous_survival", "kka_w_continuous",
    "kka_survival_finite_tau", "kka_w_finite_tau", "propagate_nonhermitian", "lorentzian_g0",
    "rate_excited", "rate_ground", "rate_equation_run", "RatePopulations", "Variant",
]
