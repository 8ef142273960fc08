import math

import numpy as np
import pytest

from zeno_lab import dynamics
from zeno_lab.dynamics import (
    IntegratorConfig,
    ZenoProtocol,
    evolve,
    nonselective_measure,
    run_zeno,
    selective_measure,
)
from zeno_lab.errors import TruncationError
from zeno_lab.model import DensityMatrix, HilbertConfig, ModelParams, QubitState, build_operators, initial_state

PSI34 = QubitState(0.6, 0.8)


def _random_rho(n_max, seed):
    rng = np.random.default_rng(seed)
    d = 2 * (n_max + 1)
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = m @ m.conj().T
    return r / np.trace(r)


def test_step_rule():
    cfg = IntegratorConfig()
    p = ModelParams(delta=1.0, omega0=1.0, g=0.5)
    assert cfg.n_steps(0.1, p) == 10
    assert cfg.n_steps(1.0, p) == 40
    assert cfg.n_steps(1.0, p, stiffness=100.0) == 100
    assert cfg.halved().n_steps(1.0, p) == 80
    assert IntegratorConfig(steps_per_interval=17).n_steps(5.0, p) == 17
    with pytest.raises(ValueError):
        IntegratorConfig(steps_per_interval=3)


def test_free_precession_survival():
    # g = 0: P(tau) = |a|^4 + |b|^4 + 2|a|^2|b|^2 cos(Delta tau), and the mode stays in vacuum
    p = ModelParams(delta=1.0, g=0.0, gamma=0.1)
    tau = 0.7
    s = run_zeno(p, PSI34, ZenoProtocol(tau, 3))
    a2, b2 = 0.36, 0.64
    p1 = a2 ** 2 + b2 ** 2 + 2 * a2 * b2 * math.cos(tau)
    assert np.allclose(s.probs, p1 ** np.arange(4), atol=1e-10)
    rot = run_zeno(p, PSI34, ZenoProtocol(tau, 3, frame="rotating"))
    assert np.allclose(rot.probs, 1.0, atol=1e-10)


def test_expm_matches_rk4():
    p = ModelParams(g=0.4, gamma=0.2)
    prot = ZenoProtocol(0.8, 5)
    a = run_zeno(p, PSI34, prot, n_max=10, adaptive=False)
    b = run_zeno(p, PSI34, prot, IntegratorConfig("expm"), n_max=10, adaptive=False)
    assert np.max(np.abs(a.probs - b.probs)) < 1e-8


def test_selective_trace_index_sum():
    n_max = 3
    r = _random_rho(n_max, 1)
    rho = DensityMatrix(r, n_max)
    psi = QubitState(0.6, 0.8 * np.exp(0.3j))
    v = psi.vector
    n = n_max + 1
    expected = sum(v[q].conjugate() * r[q * n + k, qq * n + k] * v[qq]
                   for k in range(n) for q in range(2) for qq in range(2))
    out = selective_measure(rho, psi)
    assert out.trace() == pytest.approx(expected.real, abs=1e-14)
    # projection is idempotent
    assert np.allclose(selective_measure(out, psi).data, out.data, atol=1e-14)


def test_nonselective_modes():
    rho = DensityMatrix(_random_rho(2, 2), 2)
    d = nonselective_measure(rho, "dephase")
    blocks = d.qubit_blocks()
    assert np.all(blocks[0, :, 1, :] == 0) and np.all(blocks[1, :, 0, :] == 0)
    assert d.trace() == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(d.reduced_mode(), rho.reduced_mode())
    f = nonselective_measure(rho, "factorize")
    q = np.diag(np.diag(rho.reduced_qubit()))
    assert np.allclose(f.data, np.kron(q, rho.reduced_mode()))


def test_trace_and_hermiticity_preserved():
    p = ModelParams(g=0.6, gamma=0.3)
    hcfg = HilbertConfig(14)
    ops = build_operators(p, hcfg)
    rho = initial_state(PSI34, hcfg)
    for _ in range(5):
        new = evolve(rho, 1.0, ops)
        assert abs(new.trace() - rho.trace()) <= 1e-9
        assert new.hermiticity_error() <= 1e-10
        rho = nonselective_measure(new)


def test_observer_samples_end_exactly():
    p = ModelParams(g=0.3)
    s = run_zeno(p, QubitState.excited(), ZenoProtocol(0.3, 4), samples_per_interval=3)
    t = s.trajectory["t"]
    # each measurement time appears twice: just before and just after the projection
    assert np.all(np.diff(t) >= 0)
    assert np.count_nonzero(np.diff(t) == 0) == 4
    assert t[-1] == pytest.approx(1.2, abs=1e-15)
    assert len(t) == 1 + 4 * 4
    ee = s.trajectory["rho_ee"]
    assert ee[-1] == pytest.approx(s.probs[-1], abs=1e-12)


def test_zero_coupling_excited_survives():
    s = run_zeno(ModelParams(g=0.0), QubitState.excited(), ZenoProtocol(1.0, 16))
    assert np.allclose(s.probs, 1.0, atol=1e-14)


def test_adaptive_truncation_grows():
    p = ModelParams(g=0.8, gamma=0.1)
    s = run_zeno(p, PSI34, ZenoProtocol(2.0, 4), n_max=4)
    assert s.converged and s.n_max > 4
    fixed = run_zeno(p, PSI34, ZenoProtocol(2.0, 4), n_max=4, adaptive=False)
    assert not fixed.converged


def test_truncation_error_at_ceiling(monkeypatch):
    monkeypatch.setattr(dynamics, "MAX_N_MAX", 5)
    with pytest.raises(TruncationError) as info:
        run_zeno(ModelParams(g=0.9), PSI34, ZenoProtocol(3.0, 4), n_max=4)
    assert info.value.n_max == 4
    assert info.value.exit_code == 3


def test_pre_evolution_has_no_measurement():
    p = ModelParams(g=0.3, gamma=0.1)
    s = run_zeno(p, QubitState.excited(), ZenoProtocol(1.0, 2, pre_evolution_time=1.0))
    assert s.times[0] == 1.0
    # trace is untouched by unmeasured evolution
    assert s.probs[0] == pytest.approx(1.0, abs=1e-9)
    assert s.probs[1] < 1.0
