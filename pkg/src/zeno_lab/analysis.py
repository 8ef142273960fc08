"""Decay-rate diagnostics and QZE/QAZE transition detection.

``lambda_n = ln(P(n tau) / P((n+1) tau)) / tau`` is the average decay rate in the
n-th Zeno interval, ``w_n = lambda_n / tau`` its scaled version, and
``Lambda_N(tau) = -ln P(N tau) / (N tau)`` the total average rate. A tau-range
with ``dLambda_N/dtau > 0`` is Zeno (QZE), one with ``< 0`` anti-Zeno (QAZE).
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.interpolate
import scipy.optimize

from .analytic import kka_survival_finite_tau
from .dynamics import IntegratorConfig, SurvivalSeries, ZenoProtocol, run_zeno
from .errors import ZenoError
from .model import ModelParams, QubitState

log = logging.getLogger(__name__)

FLATNESS_TOL = 1e-6
REFINE_TOL = 1e-3


@dataclass
class RateSeries:
    tau: float
    lambdas: np.ndarray
    scaled: np.ndarray
    # index of the first interval with zero survival at its end, if any
    truncated_at: int | None = None


def rates_from_series(series: SurvivalSeries) -> RateSeries:
    """Per-interval decay rates; stops at the first zero survival (infinite rate)."""
    probs = np.asarray(series.probs, dtype=float)
    tau = series.tau
    stop = None
    zero = np.nonzero(probs[1:] <= 0)[0]
    if zero.size:
        stop = int(zero[0])
        log.warning("survival reaches zero after interval %d; rate is infinite there", stop)
        probs = probs[: stop + 1]
    lam = np.log(probs[:-1] / probs[1:]) / tau
    if stop is not None:
        lam = np.append(lam, np.inf)
    return RateSeries(tau, lam, lam / tau, stop)


def total_average_rate(series: SurvivalSeries, n: int | None = None) -> float:
    """``Lambda_N`` from the final survival, cross-checked against the mean of ``lambda_n``."""
    probs = np.asarray(series.probs, dtype=float)
    n = len(probs) - 1 if n is None else n
    if n < 1:
        raise ValueError("need at least one measurement")
    p_end = probs[n]
    if p_end <= 0:
        raise ZenoError(f"zero survival at N={n}; total average rate is infinite")
    direct = -math.log(p_end) / (n * series.tau)
    lam = np.log(probs[:n] / probs[1:n + 1]) / series.tau
    mean = float(np.mean(lam))
    if abs(direct - mean) > 1e-10 * max(1.0, abs(direct)):
        raise ZenoError(f"Lambda_N identity violated: {direct!r} vs {mean!r}")
    return direct


@dataclass
class Transition:
    tau_c: float
    direction: str  # "QZE->QAZE" or "QAZE->QZE"


@dataclass
class TransitionReport:
    n: int
    transitions: list[Transition]
    segments: list[tuple[float, float, str]]
    flat: bool = False

    @property
    def taus(self) -> list[float]:
        return [t.tau_c for t in self.transitions]


@dataclass
class SweepResult:
    taus: np.ndarray
    n_list: list[int]
    Lambda: np.ndarray  # shape (len(n_list), len(taus))
    params: ModelParams | None = None
    psi: QubitState | None = None
    errors: dict = field(default_factory=dict)  # (row, col) -> message
    n_max_used: np.ndarray | None = None
    converged: np.ndarray | None = None
    transitions: dict = field(default_factory=dict)  # N -> TransitionReport

    def row(self, n: int) -> np.ndarray:
        return self.Lambda[self.n_list.index(n)]


def _sweep_cell(args):
    params, psi, tau, n_list, cfg, n_max, frame = args
    n_top = max(n_list)
    try:
        series = run_zeno(params, psi, ZenoProtocol(tau, n_top, frame=frame), cfg, n_max=n_max)
    except ZenoError as exc:
        return None, str(exc), 0, False
    values = []
    for n in n_list:
        p = series.probs[n]
        values.append(-math.log(p) / (n * tau) if p > 0 else math.inf)
    return values, None, series.n_max, series.converged


def default_tau_grid(delta: float = 1.0, points: int = 60, lo: float = 0.05, hi: float = 6.0):
    return np.geomspace(lo, hi, points) / delta


def sweep_tau(params: ModelParams, psi: QubitState, n_list, tau_grid,
              cfg: IntegratorConfig | None = None, n_max: int = 12, jobs: int = 1,
              frame: str = "lab", with_transitions: bool = True) -> SweepResult:
    """Fill ``Lambda_N(tau)``; one run with ``max(n_list)`` measurements per tau serves every N."""
    taus = np.asarray(tau_grid, dtype=float)
    if np.any(np.diff(taus) <= 0):
        raise ValueError("tau_grid must be strictly ascending")
    n_list = sorted(int(n) for n in n_list)
    if not n_list or n_list[0] < 1:
        raise ValueError("n_list must contain positive integers")
    cfg = cfg or IntegratorConfig()
    cells = [(params, psi, float(t), n_list, cfg, n_max, frame) for t in taus]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(c) for c in cells]

    Lam = np.full((len(n_list), len(taus)), np.nan)
    used = np.zeros(len(taus), dtype=int)
    conv = np.zeros(len(taus), dtype=bool)
    errors = {}
    for j, (values, err, nm, ok) in enumerate(results):
        used[j], conv[j] = nm, ok
        if err is not None:
            for i in range(len(n_list)):
                errors[(i, j)] = err
            continue
        Lam[:, j] = values
    result = SweepResult(taus, n_list, Lam, params, psi, errors, used, conv)
    if with_transitions:
        result.transitions = transition_times(result)
    return result


def kka_sweep(params: ModelParams, psi: QubitState, n_list, tau_grid,
              cfg: IntegratorConfig | None = None, n_max: int = 12) -> SweepResult:
    """Same grid, with survival replaced by ``[P_KKA(tau)]^N``."""
    taus = np.asarray(tau_grid, dtype=float)
    n_list = sorted(int(n) for n in n_list)
    Lam = np.empty((len(n_list), len(taus)))
    for j, tau in enumerate(taus):
        p1 = kka_survival_finite_tau(psi, float(tau), params, cfg, n_max)
        for i, n in enumerate(n_list):
            Lam[i, j] = -math.log(p1 ** n) / (n * tau)
    return SweepResult(taus, n_list, Lam, params, psi)


def _label(slope: float) -> str:
    return "QZE" if slope > 0 else "QAZE"


def transitions_for_row(taus, values, n: int = 0, flat_tol: float = FLATNESS_TOL,
                        tol: float = REFINE_TOL) -> TransitionReport:
    """Sign changes of ``dLambda/dtau`` along one row, refined on a cubic interpolant."""
    taus = np.asarray(taus, dtype=float)
    values = np.asarray(values, dtype=float)
    ok = np.isfinite(values)
    taus, values = taus[ok], values[ok]
    if taus.size < 3:
        return TransitionReport(n, [], [], flat=True)
    slope = np.gradient(values, taus)
    if np.all(np.abs(slope) < flat_tol):
        return TransitionReport(n, [], [], flat=True)

    spline = scipy.interpolate.CubicSpline(taus, values)
    dspline = spline.derivative()
    signs = np.sign(slope)
    # zero slopes inherit the previous sign so a touching zero is not double counted
    for i in range(1, len(signs)):
        if signs[i] == 0:
            signs[i] = signs[i - 1]
    if signs[0] == 0:
        nz = signs[signs != 0]
        signs[0] = nz[0] if nz.size else 1

    transitions = []
    for i in range(len(taus) - 1):
        if signs[i] == signs[i + 1]:
            continue
        lo, hi = taus[i], taus[i + 1]
        if np.sign(dspline(lo)) != np.sign(dspline(hi)) and dspline(lo) != 0:
            tc = scipy.optimize.bisect(lambda x: float(dspline(x)), lo, hi, xtol=tol)
        else:
            # interpolant disagrees with the difference stencil; fall back to the linear zero
            tc = lo + (hi - lo) * slope[i] / (slope[i] - slope[i + 1])
        kind = "QZE->QAZE" if signs[i] > 0 else "QAZE->QZE"
        transitions.append(Transition(float(tc), kind))

    edges = [float(taus[0])] + [t.tau_c for t in transitions] + [float(taus[-1])]
    labels = [_label(signs[0])]
    for t in transitions:
        labels.append("QAZE" if t.direction == "QZE->QAZE" else "QZE")
    segments = [(edges[k], edges[k + 1], labels[k]) for k in range(len(labels))]
    return TransitionReport(n, transitions, segments)


def transition_times(sweep: SweepResult, **kwargs) -> dict:
    """Per-N transition reports for a sweep."""
    return {n: transitions_for_row(sweep.taus, sweep.Lambda[i], n, **kwargs)
            for i, n in enumerate(sweep.n_list)}


def default_jobs() -> int:
    return max(1, min(8, os.cpu_count() or 1))
