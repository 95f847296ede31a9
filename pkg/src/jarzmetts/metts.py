"""METTS Markov chain.

Each chain step evolves the current classical product state by
``exp(-beta H / 2)``, records the normalized result as a sample and collapses
it onto a new product state. Trajectory ``m`` (1-based) collapses in the z
basis when ``m`` is odd and in the x basis when it is even.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .spinops import PauliOperator
from .statevec import ImagTimePropagator, ProductState, collapse, expectation

DEFAULT_WARMUP = 5


@dataclass(frozen=True)
class MettsSample:
    state: np.ndarray
    source_cps: ProductState
    weight: float
    chain_step: int
    collapse_basis: str


def collapse_basis(trajectory: int) -> str:
    """Basis used to collapse trajectory ``trajectory`` (1-based)."""
    return "z" if trajectory % 2 == 1 else "x"


@dataclass
class MettsChain:
    H: PauliOperator
    beta: float
    current_cps: ProductState
    rng: np.random.Generator
    warmup: int = DEFAULT_WARMUP
    dbeta: float | None = None
    step_index: int = 0
    samples: list[MettsSample] = field(default_factory=list)

    def __post_init__(self):
        self._propagator = ImagTimePropagator(self.H, self.beta / 2, self.dbeta)

    @property
    def imag_backend(self) -> str:
        return self._propagator.backend

    def post_warmup(self) -> list[MettsSample]:
        return self.samples[self.warmup:]

    def run(self, count: int) -> list[MettsSample]:
        """Advance until ``count`` post-warm-up samples exist; return them."""
        while len(self.samples) < self.warmup + count:
            chain_next(self)
        return self.post_warmup()[:count]

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "basis", "cps", "e_initial"])
            for s in self.samples:
                w.writerow([s.chain_step, s.collapse_basis, str(s.source_cps),
                            repr(expectation(s.state, self.H))])


def chain_init(H: PauliOperator, beta: float, seed, warmup: int = DEFAULT_WARMUP,
               dbeta: float | None = None) -> MettsChain:
    """New chain at step 0 on a uniformly random z-basis product state.

    ``seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    if warmup < 0:
        raise ValueError("warmup must be non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    index = int(rng.integers(0, 1 << H.n))
    cps = ProductState.from_index(index, H.n, "z")
    return MettsChain(H, beta, cps, rng, warmup=warmup, dbeta=dbeta)


def chain_next(chain: MettsChain) -> MettsSample:
    psi, weight = chain._propagator(chain.current_cps.to_vector())
    trajectory = chain.step_index + 1
    basis = collapse_basis(trajectory)
    sample = MettsSample(psi, chain.current_cps, weight, chain.step_index, basis)
    chain.samples.append(sample)
    chain.current_cps = collapse(psi, basis, chain.rng)
    chain.step_index += 1
    return sample


@dataclass(frozen=True)
class EnsembleAverage:
    mean: float
    stderr: float
    running: np.ndarray

    def __iter__(self):
        # unpacks as (mean, stderr)
        return iter((self.mean, self.stderr))


def ensemble_average(samples: Sequence[MettsSample], op: PauliOperator,
                     transform: Callable[[np.ndarray], np.ndarray] | None = None) -> EnsembleAverage:
    """Sample mean of ``<phi|T^dag op T|phi>`` with a plain sqrt(var/M) error.

    No autocorrelation correction is applied to the error bar.
    """
    if len(samples) < 2:
        raise ValueError("need at least two samples")
    vals = np.array([expectation(transform(s.state) if transform else s.state, op)
                     for s in samples])
    running = np.cumsum(vals) / np.arange(1, len(vals) + 1)
    stderr = float(np.std(vals, ddof=1) / np.sqrt(len(vals)))
    return EnsembleAverage(float(vals.mean()), stderr, running)
