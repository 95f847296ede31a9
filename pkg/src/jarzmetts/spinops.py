"""Pauli-string operators, driven spin Hamiltonians and lambda(t) schedules.

Qubit ordering: site 1 (index 0 in a label string) is the most significant
bit of a computational-basis index, so ``"XI"`` acts as ``kron(X, I)``.
Every module in the package relies on this convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

MAX_DENSE_QUBITS = 12
PAULI_LABELS = "IXYZ"


class SizeLimitError(ValueError):
    """Raised when a dense representation would exceed ``MAX_DENSE_QUBITS``."""


def _check_label(label: str) -> str:
    if not label:
        raise ValueError("Pauli string needs at least one site")
    bad = set(label) - set(PAULI_LABELS)
    if bad:
        raise ValueError(f"invalid Pauli labels {sorted(bad)} in {label!r}")
    return label


def pauli_masks(label: str) -> tuple[int, int, int]:
    """Return ``(flip_mask, sign_mask, n_y)`` for a Pauli label.

    A string ``P`` acts on basis state ``|j>`` as
    ``P|j> = i**n_y * (-1)**popcount(j & sign_mask) |j ^ flip_mask>``.
    """
    n = len(label)
    flip = sign = 0
    for site, c in enumerate(label):
        bit = 1 << (n - 1 - site)
        if c in "XY":
            flip |= bit
        if c in "ZY":
            sign |= bit
    return flip, sign, label.count("Y")


def popcount_parity(values: np.ndarray) -> np.ndarray:
    parity = np.zeros_like(values)
    v = values.copy()
    while np.any(v):
        parity ^= v & 1
        v >>= 1
    return parity


@dataclass(frozen=True)
class PauliOperator:
    """Real-weighted sum of Pauli strings on ``n`` qubits.

    Construction canonicalizes: duplicate strings are merged, zero
    coefficients dropped and terms sorted by label, so two operators that
    represent the same sum compare equal.
    """

    n: int
    terms: tuple[tuple[float, str], ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("operator needs n >= 1 qubits")
        merged: dict[str, float] = {}
        for coeff, label in self.terms:
            _check_label(label)
            if len(label) != self.n:
                raise ValueError(f"label {label!r} does not have {self.n} sites")
            c = float(coeff)
            if not np.isfinite(c):
                raise ValueError("coefficients must be finite reals")
            merged[label] = merged.get(label, 0.0) + c
        canon = tuple((c, lab) for lab, c in sorted(merged.items()) if c != 0.0)
        object.__setattr__(self, "terms", canon)

    @classmethod
    def from_terms(cls, n: int, terms: Iterable[tuple[float, str]]) -> PauliOperator:
        return cls(n, tuple(terms))

    @classmethod
    def single(cls, n: int, coeff: float, ops: dict[int, str]) -> PauliOperator:
        """Operator ``coeff * prod_k ops[k]`` with 0-based site keys."""
        chars = ["I"] * n
        for site, p in ops.items():
            if not 0 <= site < n:
                raise ValueError(f"site {site} out of range for n={n}")
            chars[site] = p
        return cls(n, ((coeff, "".join(chars)),))

    @classmethod
    def identity(cls, n: int) -> PauliOperator:
        return cls(n, ((1.0, "I" * n),))

    @classmethod
    def zero(cls, n: int) -> PauliOperator:
        return cls(n, ())

    def __add__(self, other: PauliOperator) -> PauliOperator:
        if not isinstance(other, PauliOperator):
            return NotImplemented
        if other.n != self.n:
            raise ValueError("qubit counts differ")
        return PauliOperator(self.n, self.terms + other.terms)

    def __sub__(self, other: PauliOperator) -> PauliOperator:
        return self + (-1.0) * other

    def __mul__(self, scalar: float) -> PauliOperator:
        return PauliOperator(self.n, tuple((scalar * c, p) for c, p in self.terms))

    __rmul__ = __mul__

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(p for _, p in self.terms)

    def coefficient(self, label: str) -> float:
        for c, p in self.terms:
            if p == label:
                return c
        return 0.0

    def is_diagonal(self) -> bool:
        return all(set(p) <= {"I", "Z"} for p in self.labels)

    @cached_property
    def _masks(self):
        return [(c, *pauli_masks(p)) for c, p in self.terms]

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """Return ``O @ psi`` without forming the dense matrix."""
        psi = np.asarray(psi)
        dim = 1 << self.n
        if psi.shape[0] != dim:
            raise ValueError(f"state has leading dimension {psi.shape[0]}, expected {dim}")
        idx = np.arange(dim)
        out = np.zeros(psi.shape, dtype=complex)
        for c, flip, sign, ny in self._masks:
            phase = (1j) ** ny * (1 - 2 * popcount_parity(idx & sign))
            amp = c * phase
            if psi.ndim > 1:
                amp = amp[:, None]
            out[idx ^ flip] += amp * psi
        return out

    def to_dense(self) -> np.ndarray:
        return to_dense(self)

    def __repr__(self) -> str:
        body = " + ".join(f"{c:g}*{p}" for c, p in self.terms) or "0"
        return f"PauliOperator(n={self.n}: {body})"


def to_dense(op: PauliOperator) -> np.ndarray:
    """Dense ``2**n x 2**n`` matrix of ``op`` (site 1 = most significant bit)."""
    if op.n > MAX_DENSE_QUBITS:
        raise SizeLimitError(f"dense matrices limited to n <= {MAX_DENSE_QUBITS}, got n={op.n}")
    dim = 1 << op.n
    idx = np.arange(dim)
    mat = np.zeros((dim, dim), dtype=complex)
    for c, flip, sign, ny in op._masks:
        phase = (1j) ** ny * (1 - 2 * popcount_parity(idx & sign))
        mat[idx ^ flip, idx] += c * phase
    return mat


@dataclass(frozen=True)
class LambdaProtocol:
    """Linear ramp of lambda from 0 to 1 over ``total_time`` in ``num_steps`` steps."""

    total_time: float
    num_steps: int = 1
    shape: str = "linear"

    def __post_init__(self):
        if not self.total_time > 0:
            raise ValueError("total_time must be positive")
        if int(self.num_steps) != self.num_steps or self.num_steps < 1:
            raise ValueError("num_steps must be an integer >= 1")
        if self.shape != "linear":
            raise ValueError(f"unsupported protocol shape {self.shape!r}")

    @property
    def dt(self) -> float:
        return self.total_time / self.num_steps

    def step_lambdas(self) -> np.ndarray:
        """lambda at the end of each step, earliest first."""
        return np.array([lambda_at(self, k * self.dt) for k in range(1, self.num_steps + 1)])


def lambda_at(protocol: LambdaProtocol, t: float) -> float:
    tau = protocol.total_time
    # tolerate round-off from k * dt at the final step
    slack = 1e-12 * tau
    if t < -slack or t > tau + slack:
        raise ValueError(f"t={t} outside [0, {tau}]")
    return min(max(t / tau, 0.0), 1.0)


@dataclass(frozen=True)
class DrivenHamiltonian:
    """``H(lambda) = base + lambda * drive`` with its lambda(t) schedule."""

    base: PauliOperator
    drive: PauliOperator
    schedule: LambdaProtocol = field(default_factory=lambda: LambdaProtocol(1.0))

    def __post_init__(self):
        if self.base.n != self.drive.n:
            raise ValueError("base and drive act on different qubit counts")

    @property
    def n(self) -> int:
        return self.base.n

    def at(self, lam: float) -> PauliOperator:
        return self.base + lam * self.drive

    @property
    def initial(self) -> PauliOperator:
        return self.at(0.0)

    @property
    def final(self) -> PauliOperator:
        return self.at(1.0)

    def with_schedule(self, schedule: LambdaProtocol) -> DrivenHamiltonian:
        return DrivenHamiltonian(self.base, self.drive, schedule)


def _chain_sum(n: int, coeff: float, pair: str) -> list[tuple[float, str]]:
    terms = []
    for i in range(n - 1):
        chars = ["I"] * n
        chars[i] = chars[i + 1] = pair
        terms.append((coeff, "".join(chars)))
    return terms


def _field_sum(n: int, coeff: float, axis: str) -> list[tuple[float, str]]:
    terms = []
    for i in range(n):
        chars = ["I"] * n
        chars[i] = axis
        terms.append((coeff, "".join(chars)))
    return terms


def build_tfim(n: int, jz: float = 1.0, hx: float = 1.0,
               schedule: LambdaProtocol | None = None) -> DrivenHamiltonian:
    """Open-chain transverse-field Ising model with the field ramped 1 -> 1.5.

    ``H(lambda) = jz * sum_i Z_i Z_{i+1} + (1 + lambda/2) * hx * sum_i X_i``.
    """
    if n < 1:
        raise ValueError("TFIM needs n >= 1")
    base = PauliOperator(n, tuple(_chain_sum(n, jz, "Z") + _field_sum(n, hx, "X")))
    drive = PauliOperator(n, tuple(_field_sum(n, 0.5 * hx, "X")))
    return DrivenHamiltonian(base, drive, schedule or LambdaProtocol(1.0))


def build_heisenberg(n: int, couplings: Sequence[float] = (1.0, 1.0, 1.0),
                     fields: Sequence[float] = (0.0, 0.0, 0.0),
                     drive: PauliOperator | None = None,
                     schedule: LambdaProtocol | None = None) -> DrivenHamiltonian:
    """Open-chain XYZ model with a uniform field and an arbitrary drive.

    ``drive`` defaults to ``0.5 * sum_i X_i``, the same ramp as the TFIM.
    """
    if n < 2:
        raise ValueError("Heisenberg chain needs n >= 2")
    terms: list[tuple[float, str]] = []
    for coeff, axis in zip(couplings, "XYZ"):
        terms += _chain_sum(n, coeff, axis)
    for coeff, axis in zip(fields, "XYZ"):
        terms += _field_sum(n, coeff, axis)
    base = PauliOperator(n, tuple(terms))
    if drive is None:
        drive = PauliOperator(n, tuple(_field_sum(n, 0.5, "X")))
    if drive.n != n:
        raise ValueError("drive acts on a different qubit count")
    return DrivenHamiltonian(base, drive, schedule or LambdaProtocol(1.0))


MODEL_BUILDERS = {"tfim": build_tfim, "heisenberg": build_heisenberg}
