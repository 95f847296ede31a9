"""Dense pure-state engine.

States are plain complex numpy vectors of length ``2**n`` in the ordering
documented in :mod:`jarzmetts.spinops`. Every function returns a new array
and leaves its input untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .spinops import DrivenHamiltonian, PauliOperator, popcount_parity, pauli_masks, to_dense

NORM_TOL = 1e-10

_SINGLE = {
    "z+": np.array([1.0, 0.0], dtype=complex),
    "z-": np.array([0.0, 1.0], dtype=complex),
    "x+": np.array([1.0, 1.0], dtype=complex) / np.sqrt(2),
    "x-": np.array([1.0, -1.0], dtype=complex) / np.sqrt(2),
}


@dataclass(frozen=True)
class ProductState:
    """Classical product state, one basis label per site."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if not self.labels:
            raise ValueError("product state needs at least one site")
        bad = set(self.labels) - set(_SINGLE)
        if bad:
            raise ValueError(f"unknown site labels {sorted(bad)}")

    @classmethod
    def from_index(cls, index: int, n: int, basis: str = "z") -> ProductState:
        """Product state whose bit pattern is ``index`` (0 -> '+', 1 -> '-')."""
        bits = [(index >> (n - 1 - k)) & 1 for k in range(n)]
        return cls(tuple(f"{basis}{'-' if b else '+'}" for b in bits))

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def basis(self) -> str:
        kinds = {lab[0] for lab in self.labels}
        return kinds.pop() if len(kinds) == 1 else "mixed"

    def index(self) -> int:
        """Bit pattern in the state's own basis."""
        out = 0
        for lab in self.labels:
            out = (out << 1) | (lab[1] == "-")
        return out

    def to_vector(self) -> np.ndarray:
        vec = np.array([1.0 + 0j])
        for lab in self.labels:
            vec = np.kron(vec, _SINGLE[lab])
        return vec

    def __str__(self) -> str:
        return " ".join(self.labels)


def num_qubits(psi: np.ndarray) -> int:
    dim = psi.shape[0]
    n = dim.bit_length() - 1
    if dim != 1 << n or n < 1:
        raise ValueError(f"state length {dim} is not a power of two")
    return n


def basis_state(index: int, n: int) -> np.ndarray:
    psi = np.zeros(1 << n, dtype=complex)
    psi[index] = 1.0
    return psi


def normalize(psi: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError("cannot normalize the zero vector")
    return psi / norm


def _check_dims(psi: np.ndarray, n: int):
    if psi.shape[0] != 1 << n:
        raise ValueError(f"state dimension {psi.shape[0]} does not match n={n}")


def expectation(psi: np.ndarray, op: PauliOperator) -> float:
    """``<psi|op|psi>`` for a normalized state."""
    _check_dims(psi, op.n)
    val = np.vdot(psi, op.apply(psi))
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ArithmeticError(f"expectation of Hermitian operator has imaginary part {val.imag}")
    return float(val.real)


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    return float(abs(np.vdot(a, b)) ** 2)


# ---- imaginary time -------------------------------------------------------

class ImagTimePropagator:
    """Applies ``exp(-beta_half * H)`` and reports the squared pre-normalization norm.

    ``dbeta=None`` selects the exact dense backend. A positive ``dbeta``
    selects the factorized backend: the imaginary time is cut into
    ``ceil(2 * beta_half / dbeta)`` slices and each slice applies
    ``exp(-d * c_k P_k)`` term by term, so the result carries the first-order
    splitting error of a step-wise imaginary-time emulator.
    """

    def __init__(self, H: PauliOperator, beta_half: float, dbeta: float | None = None):
        if beta_half < 0:
            raise ValueError("beta_half must be non-negative")
        if dbeta is not None and not dbeta > 0:
            raise ValueError("dbeta must be positive")
        self.H = H
        self.beta_half = float(beta_half)
        self.dbeta = dbeta
        self._matrix = None
        if dbeta is None:
            if beta_half > 0:
                evals, evecs = np.linalg.eigh(to_dense(H))
                self._matrix = (evecs * np.exp(-beta_half * evals)) @ evecs.conj().T
        else:
            self.num_slices = max(1, int(np.ceil(2 * beta_half / dbeta - 1e-9))) if beta_half > 0 else 0
            self._slice = beta_half / self.num_slices if self.num_slices else 0.0
            self._masks = [(c, *pauli_masks(p)) for c, p in H.terms]

    @property
    def backend(self) -> str:
        return "exact" if self.dbeta is None else f"trotter({self.dbeta:g})"

    def _apply_factorized(self, psi: np.ndarray) -> np.ndarray:
        n = self.H.n
        idx = np.arange(1 << n)
        factors = []
        for c, flip, sign, ny in self._masks:
            phase = (1j) ** ny * (1 - 2 * popcount_parity(idx & sign))
            a = self._slice * c
            factors.append((np.cosh(a), np.sinh(a), flip, phase))
        out = psi.astype(complex, copy=True)
        for _ in range(self.num_slices):
            for ch, sh, flip, phase in factors:
                # exp(-a P) = cosh(a) I - sinh(a) P since P^2 = I
                moved = np.empty_like(out)
                moved[idx ^ flip] = phase * out
                out = ch * out - sh * moved
        return out

    def __call__(self, psi: np.ndarray) -> tuple[np.ndarray, float]:
        _check_dims(psi, self.H.n)
        if self.beta_half == 0:
            return psi.astype(complex, copy=True), float(np.vdot(psi, psi).real)
        if self._matrix is not None:
            out = self._matrix @ psi
        else:
            out = self._apply_factorized(psi)
        weight = float(np.vdot(out, out).real)
        if not weight > 0:
            raise ArithmeticError("imaginary-time evolution produced a zero vector")
        return out / np.sqrt(weight), weight


def propagate_imag(psi: np.ndarray, H: PauliOperator, beta_half: float,
                   dbeta: float | None = None) -> tuple[np.ndarray, float]:
    """Evolve ``psi`` by ``exp(-beta_half H)``; return (normalized state, weight).

    For a normalized product state ``|i>`` and ``beta_half = beta / 2`` the
    weight equals ``<i|exp(-beta H)|i>``.
    """
    return ImagTimePropagator(H, beta_half, dbeta)(psi)


# ---- real time ------------------------------------------------------------

def _step_unitary(H: np.ndarray, dt: float) -> np.ndarray:
    evals, evecs = np.linalg.eigh(H)
    return (evecs * np.exp(-1j * dt * evals)) @ evecs.conj().T


def protocol_propagator(model: DrivenHamiltonian) -> np.ndarray:
    """Full propagator ``U = U_N ... U_2 U_1`` with ``U_k = exp(-i H(lambda(k dt)) dt)``.

    The earliest step acts first. Each step exponential is exact; the only
    approximation is the piecewise-constant time ordering.
    """
    return _cached_propagator(model)


@lru_cache(maxsize=32)
def _cached_propagator(model: DrivenHamiltonian) -> np.ndarray:
    sched = model.schedule
    base = to_dense(model.base)
    drive = to_dense(model.drive)
    dim = base.shape[0]
    U = np.eye(dim, dtype=complex)
    if model.drive.is_zero:
        U = _step_unitary(base, sched.total_time)
    else:
        for lam in sched.step_lambdas():
            U = _step_unitary(base + lam * drive, sched.dt) @ U
    U.setflags(write=False)
    return U


def propagate_real_trotter(psi: np.ndarray, model: DrivenHamiltonian) -> np.ndarray:
    _check_dims(psi, model.n)
    return protocol_propagator(model) @ psi


# ---- projective collapse --------------------------------------------------

def _hadamard_all(psi: np.ndarray, n: int) -> np.ndarray:
    h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    t = psi.reshape((2,) * n)
    for axis in range(n):
        t = np.moveaxis(np.tensordot(h, t, axes=([1], [axis])), 0, axis)
    return t.reshape(-1)


def basis_probabilities(psi: np.ndarray, basis: str) -> np.ndarray:
    n = num_qubits(psi)
    if basis == "z":
        amps = psi
    elif basis == "x":
        amps = _hadamard_all(psi, n)
    else:
        raise ValueError(f"basis must be 'z' or 'x', got {basis!r}")
    probs = np.abs(amps) ** 2
    return probs / probs.sum()


def collapse(psi: np.ndarray, basis: str, rng: np.random.Generator) -> ProductState:
    """Sample a full product-basis outcome with Born probabilities."""
    n = num_qubits(psi)
    probs = basis_probabilities(psi, basis)
    cdf = np.cumsum(probs)
    k = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    k = min(k, len(probs) - 1)
    return ProductState.from_index(k, n, basis)


def imag_backend_error(H: PauliOperator, beta: float, dbeta: float) -> float:
    """Worst-case infidelity of the step-wise backend against the exact one.

    Maximized over every z-basis product state evolved by ``exp(-beta H / 2)``.
    """
    exact = ImagTimePropagator(H, beta / 2)
    approx = ImagTimePropagator(H, beta / 2, dbeta)
    worst = 0.0
    for i in range(1 << H.n):
        psi = basis_state(i, H.n)
        worst = max(worst, 1.0 - fidelity(exact(psi)[0], approx(psi)[0]))
    return worst
