"""Jarzynski estimators, the Gram-matrix bound and limit diagnostics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .dynamics import Trajectory, run_trajectory, works
from .exact_thermo import diagonalize, exact_delta_f
from .metts import MettsSample, chain_init
from .spinops import DrivenHamiltonian
from .statevec import ProductState, expectation, propagate_imag, protocol_propagator

N_BOOTSTRAP = 1000


@dataclass(frozen=True)
class FreeEnergyEstimate:
    beta: float
    delta_f_tilde: float
    mean_work: float
    exp_avg: float
    m_used: int
    stderr_delta_f: float
    stderr_mean_work: float
    sigma_bound: float | None = None
    log_exp_avg: float = 0.0


def log_exp_average(w: np.ndarray, beta: float) -> np.ndarray | float:
    """``ln <exp(-beta w)>`` along the last axis, computed with log-sum-exp."""
    return logsumexp(-beta * w, axis=-1) - np.log(w.shape[-1])


def delta_f_from_works(w, beta: float) -> float:
    w = np.asarray(w, dtype=float)
    return float(-log_exp_average(w, beta) / beta)


def jarzynski_estimate(trajectories: Sequence[Trajectory] | np.ndarray, beta: float,
                       n_boot: int = N_BOOTSTRAP, seed=0) -> FreeEnergyEstimate:
    """Exponential work average with a seeded bootstrap error bar.

    ``exp_avg`` may overflow to ``inf`` for extreme ``beta * W``; the
    estimate itself always comes from ``log_exp_avg``.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    w = np.asarray(trajectories, dtype=float) if isinstance(trajectories, np.ndarray) \
        else works(trajectories)
    if w.size < 2:
        raise ValueError("need at least two trajectories")
    log_avg = float(log_exp_average(w, beta))
    rng = np.random.default_rng(seed)
    boot = np.empty(n_boot)
    # chunked to bound memory for large M
    chunk = max(1, 2_000_000 // w.size)
    for start in range(0, n_boot, chunk):
        stop = min(start + chunk, n_boot)
        idx = rng.integers(0, w.size, size=(stop - start, w.size))
        boot[start:stop] = -log_exp_average(w[idx], beta) / beta
    return FreeEnergyEstimate(
        beta=beta,
        delta_f_tilde=-log_avg / beta,
        mean_work=float(w.mean()),
        exp_avg=float(np.exp(log_avg)) if log_avg < 709.0 else float("inf"),
        m_used=int(w.size),
        stderr_delta_f=float(boot.std(ddof=1)),
        stderr_mean_work=float(w.std(ddof=1) / np.sqrt(w.size)),
        log_exp_avg=log_avg,
    )


def gram_matrix(samples: Sequence[MettsSample]) -> np.ndarray:
    states = np.array([s.state for s in samples])
    return states.conj() @ states.T


def _largest_gram_eigenvalue(states: np.ndarray) -> float:
    # the M x M Gram matrix and the dim x dim frame operator share nonzero spectra
    m, dim = states.shape
    small = states.conj() @ states.T if m <= dim else states.T @ states.conj()
    return float(np.max(np.abs(np.linalg.eigvalsh(small))))


def gram_sigma(samples: Sequence[MettsSample], distinct: bool = True) -> float:
    """Largest absolute eigenvalue of the METTS overlap matrix ``<phi_i|phi_j>``.

    The bound sums over METTS labelled by distinct product states, so by
    default repeated visits to the same product state count once and each
    collapse basis forms its own ensemble; ``sigma`` is the larger of the
    per-basis values and never exceeds ``2**n``. ``distinct=False`` uses every
    sample as given.
    """
    if len(samples) == 0:
        raise ValueError("need at least one sample")
    if not distinct:
        return _largest_gram_eigenvalue(np.array([s.state for s in samples]))
    groups: dict[str, dict[ProductState, np.ndarray]] = {}
    for s in samples:
        groups.setdefault(s.source_cps.basis, {}).setdefault(s.source_cps, s.state)
    return max(_largest_gram_eigenvalue(np.array(list(g.values()))) for g in groups.values())


def percent_error(estimate: float, exact: float) -> float:
    return 100.0 * abs(estimate - exact) / max(abs(exact), 1e-12)


@dataclass(frozen=True)
class BoundReport:
    beta: float
    n: int
    sigma: float
    delta_f_exact: float
    delta_f_tilde: float
    mean_work: float
    bound_residual: float
    ln_sigma_over_n_beta: float
    ln2_over_beta: float

    @property
    def ordering(self) -> tuple[float, float, float]:
        return (self.delta_f_exact, self.delta_f_tilde, self.mean_work)


def bound_report(estimate: FreeEnergyEstimate, sigma: float, exact_df: float,
                 n: int, beta: float) -> BoundReport:
    """Residual of ``dF_tilde >= dF - ln(sigma)/beta`` plus the sigma-scaling quantities."""
    return BoundReport(
        beta=beta,
        n=n,
        sigma=sigma,
        delta_f_exact=exact_df,
        delta_f_tilde=estimate.delta_f_tilde,
        mean_work=estimate.mean_work,
        bound_residual=estimate.delta_f_tilde - (exact_df - np.log(sigma) / beta),
        ln_sigma_over_n_beta=float(np.log(sigma) / (n * beta)),
        ln2_over_beta=float(np.log(2) / beta),
    )


@dataclass
class MettsRunConfig:
    samples: int = 300
    warmup: int = 5
    seed: int = 0
    dbeta: float | None = None
    n_boot: int = N_BOOTSTRAP


@dataclass
class LimitRow:
    beta: float
    delta_f_exact: float
    delta_f_tilde: float
    mean_work: float
    percent_error: float
    stderr: float
    sigma: float


def metts_free_energy(model: DrivenHamiltonian, beta: float, config: MettsRunConfig,
                      U: np.ndarray | None = None):
    """One METTS run: samples, trajectories and the free-energy estimate."""
    U = protocol_propagator(model) if U is None else U
    seeds = np.random.SeedSequence(config.seed).spawn(2)
    chain = chain_init(model.initial, beta, seeds[0], warmup=config.warmup, dbeta=config.dbeta)
    samples = chain.run(config.samples)
    trajs = [run_trajectory(s, model, U) for s in samples]
    est = jarzynski_estimate(trajs, beta, n_boot=config.n_boot, seed=seeds[1])
    return samples, trajs, est


def limit_diagnostics(model: DrivenHamiltonian, beta_grid: Sequence[float],
                      config: MettsRunConfig | None = None,
                      require_nondegenerate: bool = False) -> list[LimitRow]:
    """Per-beta comparison of ``dF_exact``, ``dF_tilde`` and ``<W>``.

    With ``require_nondegenerate`` (used for large-beta checks) a degenerate
    ground state of either endpoint raises, since the large-beta limit only
    coincides when both ground states are unique.
    """
    config = config or MettsRunConfig()
    if require_nondegenerate:
        for label, H in (("initial", model.initial), ("final", model.final)):
            g = diagonalize(H).ground_degeneracy()
            if g != 1:
                raise ValueError(f"{label} Hamiltonian has a {g}-fold degenerate ground state; "
                                 "the large-beta limit is not exact in that case")
    U = protocol_propagator(model)
    rows = []
    for beta in beta_grid:
        samples, _, est = metts_free_energy(model, beta, config, U)
        exact = exact_delta_f(model, beta)
        rows.append(LimitRow(beta, exact, est.delta_f_tilde, est.mean_work,
                             percent_error(est.delta_f_tilde, exact), est.stderr_delta_f,
                             gram_sigma(samples)))
    return rows


def metts_limit_delta_f(model: DrivenHamiltonian, beta: float, U: np.ndarray | None = None) -> float:
    """Large-M limit of ``dF_tilde`` for the alternating z/x METTS chain.

    In equilibrium the product states collapsed in a given basis are drawn
    with weights ``<i|exp(-beta H0)|i> / Z0``, and half of the samples come
    from each basis, so the limit follows by enumerating both product bases.
    """
    U = protocol_propagator(model) if U is None else U
    H0, H1 = model.initial, model.final
    per_basis = []
    for basis in ("z", "x"):
        log_p, w = [], []
        for i in range(1 << model.n):
            phi, weight = propagate_imag(ProductState.from_index(i, model.n, basis).to_vector(),
                                         H0, beta / 2)
            log_p.append(np.log(weight))
            w.append(expectation(U @ phi, H1) - expectation(phi, H0))
        log_p = np.array(log_p) - logsumexp(log_p)
        per_basis.append(logsumexp(log_p - beta * np.array(w)))
    return float(-(logsumexp(per_basis) - np.log(2)) / beta)
