"""Parameter bundles and data generators for the six reference figures.

Every curve is recomputed from :class:`ModelParams`; nothing here stores
pre-computed data. Where a caption leaves a value open (fig1 couplings, fig2
widths, fig3 couplings) the bundle records the value chosen.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate

from . import analytic
from .analysis import (
    default_tau_grid,
    rates_from_series,
    sweep_tau,
)
from .config import STATE_PRESETS, state_from_spec
from .dynamics import IntegratorConfig, ZenoProtocol, run_zeno
from .io import Table, transitions_doc, sweep_table
from .model import ModelParams

PANEL_LETTERS = "abcdef"


@dataclass(frozen=True)
class Panel:
    label: str
    g: float
    gamma: float
    state: str = "e"


@dataclass(frozen=True)
class FigurePreset:
    name: str
    variant: str
    omega0: float
    panels: tuple[Panel, ...]
    delta: float = 1.0
    taus: tuple[float, ...] = ()
    n_meas: int = 0
    t_max: float = 0.0
    n_list: tuple[int, ...] = ()
    pre_evolution_time: float = 0.0
    frame: str = "lab"
    measurement: str = "selective"
    notes: str = ""

    def params(self, panel: Panel) -> ModelParams:
        return ModelParams(self.delta, self.omega0, panel.g, panel.gamma, self.variant)


def _grid(gs, gammas, state="e", gamma_major=False):
    pairs = [(g, G) for G in gammas for g in gs] if gamma_major else [(g, G) for g in gs for G in gammas]
    return tuple(Panel(PANEL_LETTERS[i], g, G, state) for i, (g, G) in enumerate(pairs))


PRESETS: dict[str, FigurePreset] = {
    "fig1": FigurePreset(
        "fig1", "jc", 1.0, _grid((0.06, 0.6), (0.03, 0.3)), t_max=30.0, measurement="none",
        notes="couplings/widths not listed in the caption; grid chosen"),
    "fig2": FigurePreset(
        "fig2", "jc", 1.0, _grid((0.06, 0.6), (0.03, 0.3), state="0.8-0.6"), taus=(0.1,),
        n_meas=100, frame="rotating",
        notes="widths not listed in the caption; projector in the interaction picture"),
    "fig3": FigurePreset(
        "fig3", "rabi", 1.0, _grid((0.05, 0.3), (0.03,), state="g"), taus=(math.pi / 2,),
        n_meas=40, pre_evolution_time=8 * math.pi, measurement="nonselective",
        notes="couplings not listed in the caption; weak 0.05, moderate 0.3"),
    "fig4": FigurePreset(
        "fig4", "rabi", 1.0, _grid((0.1, 0.8), (0.1, 0.3), state="3-4", gamma_major=True),
        taus=(1.0, 0.5, 0.1), t_max=20.0),
    "fig5": FigurePreset(
        "fig5", "rabi", 1.0,
        tuple(Panel(PANEL_LETTERS[i], 0.5, 0.1, s)
              for i, s in enumerate(("3-4", "3-4-phase-pi8", "4-3", "e"))),
        taus=(1.0, 0.01), t_max=20.0),
    "fig6": FigurePreset(
        "fig6", "rabi", 1.0, _grid((0.2, 0.5, 0.9), (0.1, 0.3), gamma_major=True),
        n_list=(1, 2, 4, 8, 16)),
}


@dataclass
class FigureData:
    tables: dict[str, Table] = field(default_factory=dict)
    docs: dict[str, object] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def _tag(panel: Panel) -> str:
    return f"{panel.label}_g{panel.g:g}_gamma{panel.gamma:g}"


def fig1(preset: FigurePreset, cfg: IntegratorConfig, samples: int = 300, **_) -> FigureData:
    """Unmeasured excited-state population vs |alpha(t)|^2."""
    out = FigureData()
    for panel in preset.panels:
        p = preset.params(panel)
        psi = state_from_spec(STATE_PRESETS[panel.state])
        dt = preset.t_max / samples
        s = run_zeno(p, psi, ZenoProtocol(dt, samples, measurement="none"), cfg,
                     samples_per_interval=1)
        t, pe = s.trajectory["t"], s.trajectory["rho_ee"]
        pa = np.abs(analytic.rw_alpha(t, p)) ** 2
        table = Table(["t", "P_numeric", "P_analytic", "residual"])
        for row in zip(t, pe, pa, pe - pa):
            table.add(*row)
        out.tables[_tag(panel)] = table
        out.summary[panel.label] = {"g": panel.g, "gamma": panel.gamma,
                                    "max_residual": float(np.max(np.abs(pe - pa))),
                                    "n_max": s.n_max}
    return out


def fig2(preset: FigurePreset, cfg: IntegratorConfig, **_) -> FigureData:
    """Exact survival vs the bath-reset product ``[P_RW(tau)]^n`` for a superposition."""
    out = FigureData()
    tau = preset.taus[0]
    for panel in preset.panels:
        p = preset.params(panel)
        psi = state_from_spec(STATE_PRESETS[panel.state])
        s = run_zeno(p, psi, ZenoProtocol(tau, preset.n_meas, frame=preset.frame), cfg)
        p1 = analytic.rw_first_interval_general(psi, tau, p)
        n = np.arange(preset.n_meas + 1)
        approx = p1 ** n
        table = Table(["n", "t", "P_exact", "P_product", "deviation"])
        for row in zip(n, s.times, s.probs, approx, s.probs - approx):
            table.add(*row)
        out.tables[_tag(panel)] = table
        out.summary[panel.label] = {"g": panel.g, "gamma": panel.gamma,
                                    "max_deviation": float(np.max(np.abs(s.probs - approx))),
                                    "first_interval_residual": float(abs(s.probs[1] - p1)),
                                    "n_max": s.n_max}
    return out


def fig3(preset: FigurePreset, cfg: IntegratorConfig, samples: int = 20, reset: bool = True,
         **_) -> FigureData:
    """Excited population: master equation vs rate equation under non-selective measurements."""
    out = FigureData()
    tau = preset.taus[0]
    for panel in preset.panels:
        p = preset.params(panel)
        psi = state_from_spec(STATE_PRESETS[panel.state])
        prot = ZenoProtocol(tau, preset.n_meas, "nonselective",
                            pre_evolution_time=preset.pre_evolution_time)
        s = run_zeno(p, psi, prot, cfg, samples_per_interval=samples)
        t, me = s.trajectory["t"], s.trajectory["rho_ee"]
        rate = analytic.rate_equation_run(p, prot, t, reset=reset).rho_ee
        table = Table(["t", "rho_ee_master", "rho_ee_rate", "difference"])
        for row in zip(t, me, rate, me - rate):
            table.add(*row)
        out.tables[_tag(panel)] = table
        out.summary[panel.label] = {
            "g": panel.g, "gamma": panel.gamma,
            "max_abs_difference": float(np.max(np.abs(me - rate))),
            "rate_min": float(rate.min()), "master_min": float(me.min()),
            "master_max": float(me.max()), "n_max": s.n_max}
    return out


def interval_average_w(n: int, tau: float, psi, params) -> np.ndarray:
    """``(1/tau) int_{k tau}^{(k+1) tau} w`` for k < n: the w_k implied by the continuous-limit survival."""
    vals = np.empty(n)
    for k in range(n):
        vals[k] = scipy.integrate.quad(lambda s: analytic.continuous_w(s, psi, params),
                                       k * tau, (k + 1) * tau, epsabs=1e-13, epsrel=1e-11)[0] / tau
    return vals


def _w_tables(preset, panel, cfg, out, with_kka=False):
    p = preset.params(panel)
    psi = state_from_spec(STATE_PRESETS[panel.state])
    table = Table(["tau", "n", "t", "w_n", "w_continuous_avg"])
    worst = {}
    for tau in preset.taus:
        n = int(round(preset.t_max / tau))
        if with_kka and tau < 0.05:
            continue
        s = run_zeno(p, psi, ZenoProtocol(tau, n), cfg)
        rates = rates_from_series(s)
        avg = interval_average_w(len(rates.scaled), tau, psi, p)
        for k, (w, wa) in enumerate(zip(rates.scaled, avg)):
            table.add(tau, k, k * tau, w, wa)
        worst[str(tau)] = float(np.max(np.abs(rates.scaled - avg) / avg))
    out.tables[_tag(panel) + "_wn"] = table
    curve = Table(["t", "w"])
    t = np.linspace(0.0, preset.t_max, 401)
    for row in zip(t, analytic.continuous_w(t, psi, p)):
        curve.add(*row)
    out.tables[_tag(panel) + "_w_analytic"] = curve
    info = {"g": panel.g, "gamma": panel.gamma, "state": panel.state,
            "max_relative_deviation": worst}
    if with_kka:
        info["w_kka_continuous"] = analytic.kka_w_continuous(psi, p)
        info["w_kka"] = {str(tau): analytic.kka_w_finite_tau(psi, tau, p, cfg) for tau in preset.taus}
    out.summary[panel.label] = info


def fig4(preset: FigurePreset, cfg: IntegratorConfig, **_) -> FigureData:
    out = FigureData()
    for panel in preset.panels:
        _w_tables(preset, panel, cfg, out)
    return out


def fig5(preset: FigurePreset, cfg: IntegratorConfig, **_) -> FigureData:
    out = FigureData()
    for panel in preset.panels:
        _w_tables(preset, panel, cfg, out, with_kka=True)
    return out


def _fig6_panel(args):
    preset, panel, cfg, taus = args
    p = preset.params(panel)
    psi = state_from_spec(STATE_PRESETS[panel.state])
    return sweep_tau(p, psi, preset.n_list, taus, cfg)


def fig6(preset: FigurePreset, cfg: IntegratorConfig, jobs: int = 1, taus=None, **_) -> FigureData:
    out = FigureData()
    taus = default_tau_grid() if taus is None else np.asarray(taus)
    work = [(preset, panel, cfg, taus) for panel in preset.panels]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            sweeps = list(pool.map(_fig6_panel, work))
    else:
        sweeps = [_fig6_panel(w) for w in work]
    transitions = {}
    for panel, sw in zip(preset.panels, sweeps):
        out.tables[_tag(panel) + "_sweep"] = sweep_table(sw)
        transitions[panel.label] = {"g": panel.g, "gamma": panel.gamma,
                                    "by_N": transitions_doc(sw.transitions)}
        out.summary[panel.label] = {
            "g": panel.g, "gamma": panel.gamma,
            "first_transition": {str(n): (r.taus[0] if r.taus else None)
                                 for n, r in sw.transitions.items()},
            "max_n_max": int(sw.n_max_used.max()), "all_converged": bool(sw.converged.all()),
            "errors": len(sw.errors)}
    out.docs["transitions"] = transitions
    return out


GENERATORS = {"fig1": fig1, "fig2": fig2, "fig3": fig3, "fig4": fig4, "fig5": fig5, "fig6": fig6}


def generate(name: str, cfg: IntegratorConfig | None = None, **kwargs) -> FigureData:
    if name not in PRESETS:
        raise KeyError(f"unknown figure {name!r}; choose from {sorted(PRESETS)}")
    return GENERATORS[name](PRESETS[name], cfg or IntegratorConfig(), **kwargs)
