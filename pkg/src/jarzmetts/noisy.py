"""Small gate-level circuits, density-matrix noise and the two mitigation schemes.

Gate noise is a two-qubit depolarizing channel after every CNOT; readout
noise is an independent per-qubit confusion matrix. Readout correction
inverts an empirically sampled calibration matrix; zero-noise
extrapolation folds every CNOT into 3 or 5 copies and fits a polynomial in
the fold factor, evaluated at zero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .spinops import DrivenHamiltonian, PauliOperator, popcount_parity, to_dense

MAX_NOISY_QUBITS = 4
FOLD_FACTORS = (1, 3, 5)

_I2 = np.eye(2, dtype=complex)
_PAULI = {
    "I": _I2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


class Gate(NamedTuple):
    name: str
    qubits: tuple[int, ...]
    angle: float = 0.0


def _single_qubit_matrix(g: Gate) -> np.ndarray:
    c, s = np.cos(g.angle / 2), np.sin(g.angle / 2)
    if g.name == "rx":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if g.name == "ry":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if g.name == "rz":
        return np.array([[np.exp(-0.5j * g.angle), 0], [0, np.exp(0.5j * g.angle)]])
    if g.name == "h":
        return _HADAMARD
    raise ValueError(f"unknown gate {g.name!r}")


def embed(n: int, ops: dict[int, np.ndarray]) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for q in range(n):
        out = np.kron(out, ops.get(q, _I2))
    return out


@lru_cache(maxsize=64)
def _cnot_matrix(n: int, control: int, target: int) -> np.ndarray:
    dim = 1 << n
    idx = np.arange(dim)
    cbit = 1 << (n - 1 - control)
    tbit = 1 << (n - 1 - target)
    out_idx = np.where(idx & cbit, idx ^ tbit, idx)
    mat = np.zeros((dim, dim), dtype=complex)
    mat[out_idx, idx] = 1.0
    return mat


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        if not 1 <= self.n <= MAX_NOISY_QUBITS:
            raise ValueError(f"circuits limited to 1..{MAX_NOISY_QUBITS} qubits")
        for g in self.gates:
            if any(not 0 <= q < self.n for q in g.qubits):
                raise ValueError(f"gate {g} acts outside {self.n} qubits")
            if g.name == "cx":
                if len(g.qubits) != 2 or g.qubits[0] == g.qubits[1]:
                    raise ValueError("CNOT needs distinct control and target")
            elif len(g.qubits) != 1:
                raise ValueError(f"gate {g.name} takes one qubit")
            else:
                _single_qubit_matrix(g)

    def __add__(self, other: Circuit) -> Circuit:
        if other.n != self.n:
            raise ValueError("qubit counts differ")
        return Circuit(self.n, self.gates + other.gates)

    @property
    def cnot_count(self) -> int:
        return sum(g.name == "cx" for g in self.gates)

    def gate_matrix(self, g: Gate) -> np.ndarray:
        if g.name == "cx":
            return _cnot_matrix(self.n, *g.qubits)
        return embed(self.n, {g.qubits[0]: _single_qubit_matrix(g)})

    def unitary(self) -> np.ndarray:
        U = np.eye(1 << self.n, dtype=complex)
        for g in self.gates:
            U = self.gate_matrix(g) @ U
        return U

    def fold(self, factor: int) -> Circuit:
        """Replace every CNOT by ``factor`` consecutive copies (odd factor)."""
        if factor < 1 or factor % 2 == 0:
            raise ValueError("fold factor must be an odd positive integer")
        gates: list[Gate] = []
        for g in self.gates:
            gates.extend([g] * (factor if g.name == "cx" else 1))
        return Circuit(self.n, tuple(gates))


def compile_trotter_step(model: DrivenHamiltonian, lam: float, dt: float) -> Circuit:
    """Gate sequence for ``exp(-i H(lam) dt)`` with symmetric term splitting.

    ``ZZ`` terms become CNOT-Rz-CNOT, single-site ``X`` (and ``Z``) terms become
    rotations. The one-site rotations are split in half around the two-site
    block, which costs no extra CNOTs and leaves an O(dt^3) error per step.
    """
    H = model.at(lam)
    n = H.n
    if n > MAX_NOISY_QUBITS:
        raise ValueError(f"circuits limited to n <= {MAX_NOISY_QUBITS}")
    if dt == 0:
        return Circuit(n)
    pairs: list[Gate] = []
    half: list[Gate] = []
    for c, label in H.terms:
        sites = [k for k, p in enumerate(label) if p != "I"]
        kinds = {label[k] for k in sites}
        if len(sites) == 2 and kinds == {"Z"}:
            a, b = sites
            pairs += [Gate("cx", (a, b)), Gate("rz", (b,), 2 * c * dt), Gate("cx", (a, b))]
        elif len(sites) == 1 and kinds <= {"X", "Z"}:
            half.append(Gate("r" + label[sites[0]].lower(), (sites[0],), c * dt))
        elif not sites:
            continue  # global phase
        else:
            raise ValueError(f"term {label} has no gate realization (ZZ and X/Z terms only)")
    if not pairs:
        # nothing to straddle: merge the two halves
        return Circuit(n, tuple(g._replace(angle=2 * g.angle) for g in half))
    return Circuit(n, tuple(half + pairs + half))


def compile_protocol(model: DrivenHamiltonian) -> Circuit:
    sched = model.schedule
    circ = Circuit(model.n)
    for lam in sched.step_lambdas():
        circ = circ + compile_trotter_step(model, lam, sched.dt)
    return circ


# ---- noise ----------------------------------------------------------------

@dataclass(frozen=True)
class NoiseModel:
    """``readout[q] = (p(read 1 | 0), p(read 0 | 1))`` for qubit ``q``."""

    cnot_depolarizing: float = 0.0
    readout: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if not 0 <= self.cnot_depolarizing < 1:
            raise ValueError("depolarizing probability must lie in [0, 1)")
        for p01, p10 in self.readout:
            if not (0 <= p01 <= 1 and 0 <= p10 <= 1):
                raise ValueError("readout flip probabilities must lie in [0, 1]")

    @classmethod
    def symmetric(cls, n: int, p2: float = 0.0, flip: float = 0.0) -> NoiseModel:
        return cls(p2, tuple((flip, flip) for _ in range(n)))

    def confusion(self, q: int) -> np.ndarray:
        """Column-stochastic: column = prepared bit, row = read bit."""
        p01, p10 = self.readout[q] if q < len(self.readout) else (0.0, 0.0)
        return np.array([[1 - p01, p10], [p01, 1 - p10]])

    def confusion_matrix(self, n: int) -> np.ndarray:
        out = np.array([[1.0]])
        for q in range(n):
            out = np.kron(out, self.confusion(q))
        return out


def check_density_matrix(rho: np.ndarray, tol: float = 1e-9) -> None:
    if np.linalg.norm(rho - rho.conj().T) > tol:
        raise ArithmeticError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > 1e-10 * len(rho) + tol:
        raise ArithmeticError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ArithmeticError("density matrix has a negative eigenvalue")


def pure_density(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


@lru_cache(maxsize=64)
def _pair_paulis(n: int, a: int, b: int) -> tuple[np.ndarray, ...]:
    return tuple(embed(n, {a: _PAULI[p], b: _PAULI[q]}) for p in "IXYZ" for q in "IXYZ")


def depolarize_pair(rho: np.ndarray, a: int, b: int, p: float) -> np.ndarray:
    """``(1-p) rho + p * Tr_ab(rho) (x) I/4`` written as a Pauli twirl."""
    if p == 0:
        return rho
    n = len(rho).bit_length() - 1
    twirl = sum(P @ rho @ P for P in _pair_paulis(n, a, b)) / 16
    return (1 - p) * rho + p * twirl


def run_noisy(circ: Circuit, rho0: np.ndarray, noise: NoiseModel, check: bool = False) -> np.ndarray:
    rho = np.array(rho0, dtype=complex)
    if rho.shape != (1 << circ.n, 1 << circ.n):
        raise ValueError("initial state does not match the circuit size")
    for g in circ.gates:
        G = circ.gate_matrix(g)
        rho = G @ rho @ G.conj().T
        if g.name == "cx":
            rho = depolarize_pair(rho, *g.qubits, noise.cnot_depolarizing)
        if check:
            check_density_matrix(rho)
    return rho


# ---- measurement ----------------------------------------------------------

def measurement_settings(op: PauliOperator) -> list[str]:
    """Greedy grouping of Pauli terms into qubit-wise commuting product bases."""
    settings: list[list[str]] = []
    for label in op.labels:
        if set(label) == {"I"}:
            continue
        for s in settings:
            if all(p == "I" or s[k] in ("I", p) for k, p in enumerate(label)):
                for k, p in enumerate(label):
                    if p != "I":
                        s[k] = p
                break
        else:
            settings.append(list(label))
    return ["".join(c if c != "I" else "Z" for c in s) for s in settings]


def _rotation_to_z(setting: str) -> np.ndarray:
    sdg = np.diag([1, -1j])
    ops = {}
    for q, p in enumerate(setting):
        if p == "X":
            ops[q] = _HADAMARD
        elif p == "Y":
            ops[q] = _HADAMARD @ sdg
    return embed(len(setting), ops)


def ideal_distribution(rho: np.ndarray, setting: str) -> np.ndarray:
    V = _rotation_to_z(setting)
    probs = np.clip(np.real(np.diag(V @ rho @ V.conj().T)), 0, None)
    return probs / probs.sum()


def sample_counts(rho: np.ndarray, setting: str, noise: NoiseModel, shots: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Bitstring counts for one product-basis setting, including readout flips."""
    if shots < 1:
        raise ValueError("shots must be positive")
    n = len(setting)
    p_read = noise.confusion_matrix(n) @ ideal_distribution(rho, setting)
    p_read = np.clip(p_read, 0, None)
    return rng.multinomial(shots, p_read / p_read.sum())


def term_value(label: str, dist: np.ndarray) -> float:
    n = len(label)
    mask = 0
    for k, p in enumerate(label):
        if p != "I":
            mask |= 1 << (n - 1 - k)
    signs = 1 - 2 * popcount_parity(np.arange(len(dist)) & mask)
    return float(signs @ dist)


def _setting_for(label: str, settings: Sequence[str]) -> str:
    for s in settings:
        if all(p == "I" or s[k] == p for k, p in enumerate(label)):
            return s
    raise KeyError(label)


def expectation_from_counts(op: PauliOperator, counts: dict[str, np.ndarray],
                            calibration: np.ndarray | None = None) -> float:
    dists = {}
    for s, c in counts.items():
        dist = c / c.sum()
        dists[s] = ro_correct(dist, calibration) if calibration is not None else dist
    total = 0.0
    for coeff, label in op.terms:
        if set(label) == {"I"}:
            total += coeff
        else:
            total += coeff * term_value(label, dists[_setting_for(label, list(dists))])
    return total


def measure_counts(rho: np.ndarray, op: PauliOperator, noise: NoiseModel, shots: int,
                   rng: np.random.Generator) -> dict[str, np.ndarray]:
    return {s: sample_counts(rho, s, noise, shots, rng) for s in measurement_settings(op)}


def measure_with_readout(rho: np.ndarray, op: PauliOperator, noise: NoiseModel, shots: int,
                         rng: np.random.Generator, calibration: np.ndarray | None = None) -> float:
    """Shot-sampled estimate of ``tr(rho op)`` through the readout confusion."""
    if shots < 1:
        raise ValueError("shots must be positive")
    return expectation_from_counts(op, measure_counts(rho, op, noise, shots, rng), calibration)


# ---- readout calibration ---------------------------------------------------

def calibration_matrix(n: int, noise: NoiseModel, shots: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Column ``j`` is the read-out distribution observed after preparing ``|j>``."""
    if n > MAX_NOISY_QUBITS:
        raise ValueError(f"calibration limited to n <= {MAX_NOISY_QUBITS}")
    if shots < 100 * (1 << n):
        warnings.warn(f"{shots} calibration shots is below 100 * 2^n", stacklevel=2)
    C = noise.confusion_matrix(n)
    cols = [rng.multinomial(shots, C[:, j] / C[:, j].sum()) / shots for j in range(1 << n)]
    return np.array(cols).T


def calibration_condition(calibration: np.ndarray) -> float:
    return float(np.linalg.cond(calibration))


def ro_correct(raw: np.ndarray, calibration: np.ndarray) -> np.ndarray:
    """Least-squares inversion of ``calibration @ x = raw``, clipped and renormalized."""
    if calibration_condition(calibration) > 1e12:
        raise np.linalg.LinAlgError("calibration matrix is singular")
    x, *_ = np.linalg.lstsq(calibration, np.asarray(raw, dtype=float), rcond=None)
    x = np.clip(x, 0, None)
    return x / x.sum()


# ---- zero-noise extrapolation ----------------------------------------------

@dataclass(frozen=True)
class ZNEResult:
    scales: tuple[int, ...]
    values: tuple[float, ...]
    zero_noise: float


def extrapolate(scales: Sequence[float], values: Sequence[float], fit: str = "quadratic") -> float:
    values = np.asarray(values, dtype=float)
    if np.all(values == values[0]):
        return float(values[0])
    deg = {"linear": 1, "quadratic": 2}[fit]
    coeffs = np.polyfit(np.asarray(scales, dtype=float), values, deg=min(deg, len(values) - 1))
    return float(np.polyval(coeffs, 0.0))


def zne_values(circ: Circuit, observable: PauliOperator, noise: NoiseModel, rho0: np.ndarray,
               shots: int, rng: np.random.Generator, fit: str = "quadratic",
               calibration: np.ndarray | None = None) -> ZNEResult:
    vals = []
    for k in FOLD_FACTORS:
        rho = run_noisy(circ.fold(k), rho0, noise)
        vals.append(measure_with_readout(rho, observable, noise, shots, rng, calibration))
    return ZNEResult(FOLD_FACTORS, tuple(vals), extrapolate(FOLD_FACTORS, vals, fit))


def zne_extrapolate(circ: Circuit, observable: PauliOperator, noise: NoiseModel,
                    rho0: np.ndarray, fit: str = "quadratic", shots: int = 10_000,
                    rng: np.random.Generator | None = None,
                    calibration: np.ndarray | None = None) -> float:
    """Observable extrapolated to zero CNOT noise from folds 1, 3 and 5."""
    rng = rng if rng is not None else np.random.default_rng()
    if circ.cnot_count == 0:
        return measure_with_readout(run_noisy(circ, rho0, noise), observable, noise, shots,
                                    rng, calibration)
    return zne_values(circ, observable, noise, rho0, shots, rng, fit, calibration).zero_noise


# ---- free-energy pipeline ----------------------------------------------------

MITIGATION_COLUMNS = ("raw", "ro_only", "zne_only", "ro_plus_zne", "noiseless_reference")


@dataclass
class NoisyWorkSet:
    """Pseudo-work values for one METTS ensemble under each mitigation variant."""

    works: dict[str, list[float]] = field(default_factory=lambda: {k: [] for k in MITIGATION_COLUMNS})


def noisy_pseudo_works(model: DrivenHamiltonian, states: Sequence[np.ndarray], noise: NoiseModel,
                       shots: int, rng: np.random.Generator, fit: str = "quadratic",
                       calibration_shots: int | None = None) -> NoisyWorkSet:
    """Pseudo-work of every METTS under raw, RO, ZNE and RO+ZNE processing.

    The METTS themselves are prepared without noise; the drive circuit and
    both energy readouts are noisy. Each fold's bitstring distribution is
    RO-corrected before extrapolation in the combined variant, and all four
    variants reuse the same sampled counts. The reference uses the same
    compiled circuit with exact expectations.
    """
    circ = compile_protocol(model)
    folds = {k: circ.fold(k) for k in FOLD_FACTORS}
    U_circ = circ.unitary()
    cal = calibration_matrix(model.n, noise, calibration_shots or 100 * shots, rng)
    H0, H1 = model.initial, model.final
    H0d, H1d = to_dense(H0), to_dense(H1)
    out = NoisyWorkSet()
    for psi in states:
        rho0 = pure_density(psi)
        c0 = measure_counts(rho0, H0, noise, shots, rng)
        e0_raw = expectation_from_counts(H0, c0)
        e0_ro = expectation_from_counts(H0, c0, cal)
        f_raw, f_ro = [], []
        for k in FOLD_FACTORS:
            rho = run_noisy(folds[k], rho0, noise)
            ck = measure_counts(rho, H1, noise, shots, rng)
            f_raw.append(expectation_from_counts(H1, ck))
            f_ro.append(expectation_from_counts(H1, ck, cal))
        phi = U_circ @ psi
        w = out.works
        w["raw"].append(f_raw[0] - e0_raw)
        w["ro_only"].append(f_ro[0] - e0_ro)
        w["zne_only"].append(extrapolate(FOLD_FACTORS, f_raw, fit) - e0_raw)
        w["ro_plus_zne"].append(extrapolate(FOLD_FACTORS, f_ro, fit) - e0_ro)
        w["noiseless_reference"].append(float(np.real(np.vdot(phi, H1d @ phi) - np.vdot(psi, H0d @ psi))))
    return out
