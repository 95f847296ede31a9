"""Per-trajectory work accounting.

Two trajectory kinds share one record type: METTS pseudo-work (energy of
the driven METTS in ``H(1)`` minus its energy in ``H(0)``) and exact
two-measurement-protocol samples drawn from the full spectra.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .exact_thermo import diagonalize, tmp_transition_matrix
from .metts import MettsSample
from .spinops import DrivenHamiltonian
from .statevec import expectation, protocol_propagator

TRAJECTORY_COLUMNS = ("chain_step", "kind", "e_initial", "e_final", "work")


@dataclass(frozen=True)
class Trajectory:
    e_initial: float
    e_final: float
    chain_step: int = -1
    kind: str = "metts_pseudo"

    @property
    def work(self) -> float:
        return self.e_final - self.e_initial


def run_trajectory(sample: MettsSample, model: DrivenHamiltonian,
                   U: np.ndarray | None = None) -> Trajectory:
    """Drive one METTS through the protocol and record its pseudo-work.

    ``U`` may be passed to reuse a precomputed protocol propagator.
    """
    psi = sample.state
    if psi.shape[0] != 1 << model.n:
        raise ValueError("sample and model have different qubit counts")
    if U is None:
        U = protocol_propagator(model)
    e_i = expectation(psi, model.initial)
    e_f = expectation(U @ psi, model.final)
    return Trajectory(e_i, e_f, sample.chain_step, "metts_pseudo")


class TmpSampler:
    """Draws two-measurement-protocol work values for a fixed model and ``beta``.

    Initial eigenstates are drawn from the Gibbs weights of ``H(0)``; final
    eigenstates from the Born probabilities of the evolved eigenstate.
    """

    def __init__(self, model: DrivenHamiltonian, beta: float, U: np.ndarray | None = None):
        if model.n > 8:
            raise ValueError("exact work sampling limited to n <= 8")
        self.model = model
        self.beta = beta
        self.U = protocol_propagator(model) if U is None else U
        self.spec0 = diagonalize(model.initial)
        self.spec1 = diagonalize(model.final)
        self.p0 = self.spec0.gibbs_weights(beta)
        T = tmp_transition_matrix(model, self.U, self.spec0, self.spec1)
        self._cdf0 = np.cumsum(self.p0)
        self._cdf_cols = np.cumsum(T, axis=0)

    def _pick(self, cdf: np.ndarray, u: float) -> int:
        return min(int(np.searchsorted(cdf, u * cdf[-1], side="right")), len(cdf) - 1)

    def sample(self, rng: np.random.Generator, step: int = -1) -> Trajectory:
        a = self._pick(self._cdf0, rng.random())
        b = self._pick(self._cdf_cols[:, a], rng.random())
        return Trajectory(float(self.spec0.eigenvalues[a]), float(self.spec1.eigenvalues[b]),
                          step, "tmp_exact")

    def draw(self, count: int, rng: np.random.Generator) -> list[Trajectory]:
        return [self.sample(rng, k) for k in range(count)]


def sample_tmp_trajectory(model: DrivenHamiltonian, beta: float,
                          rng: np.random.Generator) -> Trajectory:
    return TmpSampler(model, beta).sample(rng)


def works(trajectories: Iterable[Trajectory]) -> np.ndarray:
    return np.array([t.work for t in trajectories], dtype=float)


def work_histogram(trajectories: Sequence[Trajectory], bins: int | Sequence[float] = 30):
    """Counts and bin edges of the work values."""
    if len(trajectories) == 0:
        raise ValueError("no trajectories to histogram")
    if isinstance(bins, int) and bins < 1:
        raise ValueError("need at least one bin")
    w = works(trajectories)
    if isinstance(bins, int) and np.ptp(w) == 0:
        # all values equal: one occupied bin centred on the value
        edges = w[0] + np.linspace(-0.5, 0.5, bins + 1)
        counts, edges = np.histogram(w, bins=edges)
        return counts, edges
    return np.histogram(w, bins=bins)


def write_histogram_csv(path, counts, edges, **extra) -> None:
    keys = list(extra)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys + ["bin_left", "bin_right", "count"])
        for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
            w.writerow([extra[k] for k in keys] + [f"{lo:.17g}", f"{hi:.17g}", int(c)])


def trajectory_row(t: Trajectory) -> list[str]:
    return [str(t.chain_step), t.kind, f"{t.e_initial:.17g}", f"{t.e_final:.17g}", f"{t.work:.17g}"]
