"""Physical parameters, qubit states and operators on the qubit x Fock space.

Basis ordering is qubit-major: ``index = q * (n_max + 1) + n`` with ``q = 0``
for the excited state |e> and ``q = 1`` for the ground state |g>.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field

import numpy as np


class Variant(str, enum.Enum):
    RABI = "rabi"
    JC = "jc"


@dataclass(frozen=True)
class ModelParams:
    """Qubit frequency, bath centre frequency, coupling and Lorentzian width (hbar = 1)."""

    delta: float = 1.0
    omega0: float = 1.0
    g: float = 0.1
    gamma: float = 0.1
    variant: Variant = Variant.RABI

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not self.delta > 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")
        if not self.omega0 > 0:
            raise ValueError(f"omega0 must be > 0, got {self.omega0}")
        if not self.g >= 0:
            raise ValueError(f"g must be >= 0, got {self.g}")
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")

    @property
    def max_rate(self) -> float:
        return max(self.delta, self.omega0, self.g, self.gamma)

    def replace(self, **changes) -> "ModelParams":
        data = dict(delta=self.delta, omega0=self.omega0, g=self.g,
                    gamma=self.gamma, variant=self.variant)
        data.update(changes)
        return ModelParams(**data)


@dataclass(frozen=True)
class QubitState:
    """Pure qubit state ``alpha|e> + beta|g>``."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"qubit state not normalized: |alpha|^2+|beta|^2 = {norm!r}")

    @classmethod
    def excited(cls) -> "QubitState":
        return cls(1.0, 0.0)

    @classmethod
    def ground(cls) -> "QubitState":
        return cls(0.0, 1.0)

    @classmethod
    def normalized(cls, alpha: complex, beta: complex) -> "QubitState":
        n = math.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
        return cls(alpha / n, beta / n)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta], dtype=complex)

    @property
    def projector(self) -> np.ndarray:
        v = self.vector
        return np.outer(v, v.conj())

    def rotated(self, t: float, delta: float) -> "QubitState":
        """State after free precession under ``(delta/2) sigma_z`` for time ``t``."""
        return QubitState(self.alpha * cmath.exp(-0.5j * delta * t),
                          self.beta * cmath.exp(0.5j * delta * t))


def qubit_expectations(psi: QubitState) -> tuple[float, float]:
    """Return ``(<sigma_x>, <sigma_z>)`` in ``psi``."""
    sx = 2.0 * (psi.alpha * psi.beta.conjugate()).real
    sz = abs(psi.alpha) ** 2 - abs(psi.beta) ** 2
    return sx, sz


@dataclass(frozen=True)
class HilbertConfig:
    n_max: int = 12

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max}")

    @property
    def n_levels(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return 2 * self.n_levels

    def index(self, qubit: int, fock: int) -> int:
        return qubit * self.n_levels + fock


# Qubit matrices in the (|e>, |g>) basis.
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |e><g|
SIGMA_MINUS = SIGMA_PLUS.T.copy()


def destroy(n_levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_levels)), k=1).astype(complex)


@dataclass(frozen=True)
class OperatorSet:
    cfg: HilbertConfig
    params: ModelParams
    sigma_x: np.ndarray
    sigma_z: np.ndarray
    sigma_plus: np.ndarray
    sigma_minus: np.ndarray
    a: np.ndarray
    a_dag: np.ndarray
    num: np.ndarray
    h: np.ndarray
    h_eff: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.cfg.dim

    @property
    def stiffness(self) -> float:
        """Bound on |eigenvalues| of the Liouvillian.

        Eigenvalues of the no-jump part are ``-i (e_j - conj(e_k))`` for eigenvalues
        ``e`` of ``h_eff``, bounded by the real spread and twice the largest imaginary part.
        """
        cached = self.__dict__.get("_stiffness")
        if cached is None:
            ev = np.linalg.eigvals(self.h_eff)
            spread = float(ev.real.max() - ev.real.min())
            cached = math.hypot(spread, 2.0 * float(np.abs(ev.imag).max()))
            object.__setattr__(self, "_stiffness", cached)
        return cached


def build_operators(params: ModelParams, cfg: HilbertConfig) -> OperatorSet:
    """Lift qubit and mode operators to the product space and assemble H and H_eff.

    Rabi: ``(D/2) sz + w0 a^dag a + g sx (a + a^dag)``;
    JC replaces the coupling by ``g (s+ a + s- a^dag)``.
    ``h_eff = h - 1j * gamma * a^dag a``.
    """
    if not isinstance(cfg, HilbertConfig):
        cfg = HilbertConfig(int(cfg))
    n = cfg.n_levels
    eye_q = np.eye(2, dtype=complex)
    eye_f = np.eye(n, dtype=complex)
    a_f = destroy(n)

    sx = np.kron(SIGMA_X, eye_f)
    sz = np.kron(SIGMA_Z, eye_f)
    sp = np.kron(SIGMA_PLUS, eye_f)
    sm = np.kron(SIGMA_MINUS, eye_f)
    a = np.kron(eye_q, a_f)
    a_dag = a.conj().T.copy()
    num = a_dag @ a

    h = 0.5 * params.delta * sz + params.omega0 * num
    if params.variant is Variant.RABI:
        h = h + params.g * sx @ (a + a_dag)
    else:
        h = h + params.g * (sp @ a + sm @ a_dag)
    h = 0.5 * (h + h.conj().T)
    h_eff = h - 1j * params.gamma * num
    for m in (sx, sz, sp, sm, a, a_dag, num, h, h_eff):
        m.setflags(write=False)
    return OperatorSet(cfg, params, sx, sz, sp, sm, a, a_dag, num, h, h_eff)


@dataclass
class DensityMatrix:
    """Dense (possibly sub-normalized) density matrix on qubit x Fock(n_max)."""

    data: np.ndarray
    n_max: int

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        d = 2 * (self.n_max + 1)
        if self.data.shape != (d, d):
            raise ValueError(f"expected shape {(d, d)} for n_max={self.n_max}, got {self.data.shape}")

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def cfg(self) -> HilbertConfig:
        return HilbertConfig(self.n_max)

    def trace(self) -> float:
        return float(np.trace(self.data).real)

    def copy(self) -> "DensityMatrix":
        return DensityMatrix(self.data.copy(), self.n_max)

    def qubit_blocks(self) -> np.ndarray:
        """View as ``[q, n, q', n']``."""
        n = self.n_max + 1
        return self.data.reshape(2, n, 2, n)

    def reduced_qubit(self) -> np.ndarray:
        return np.einsum("inkn->ik", self.qubit_blocks())

    def reduced_mode(self) -> np.ndarray:
        return np.einsum("qnqm->nm", self.qubit_blocks())

    def fock_populations(self) -> np.ndarray:
        return np.real(np.diagonal(self.reduced_mode())).copy()

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.data + self.data.conj().T))[0])

    def embed(self, n_max: int) -> "DensityMatrix":
        """Zero-pad (or crop) the Fock factor to a new truncation."""
        old = self.n_max + 1
        new = n_max + 1
        k = min(old, new)
        blocks = np.zeros((2, new, 2, new), dtype=complex)
        blocks[:, :k, :, :k] = self.qubit_blocks()[:, :k, :, :k]
        return DensityMatrix(blocks.reshape(2 * new, 2 * new), n_max)


def initial_state(psi: QubitState, cfg: HilbertConfig) -> DensityMatrix:
    """``|psi><psi| (x) |0><0|`` in the qubit-major basis."""
    if not isinstance(cfg, HilbertConfig):
        cfg = HilbertConfig(int(cfg))
    vac = np.zeros(cfg.n_levels, dtype=complex)
    vac[0] = 1.0
    vec = np.kron(psi.vector, vac)
    return DensityMatrix(np.outer(vec, vec.conj()), cfg.n_max)


def product_vector(psi: QubitState, cfg: HilbertConfig) -> np.ndarray:
    vac = np.zeros(cfg.n_levels, dtype=complex)
    vac[0] = 1.0
    return np.kron(psi.vector, vac)
