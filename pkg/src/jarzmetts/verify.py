"""Reduced-scale invariant suite behind ``jarzmetts verify``.

Each check returns a :class:`CheckResult`; ``run_checks`` collects them in a
fixed order. ``flip_work`` swaps initial and final energies of every METTS
trajectory before estimation, a mutation that the Jensen check must catch.
"""

from __future__ import annotations

import filecmp
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.stats import unitary_group

from .config import load_config
from .dynamics import TmpSampler, Trajectory
from .estimator import MettsRunConfig, bound_report, gram_sigma, jarzynski_estimate, metts_free_energy
from .exact_thermo import exact_delta_f, exact_tmp_average, thermal_energy
from .experiment import run_experiment
from .metts import chain_init, ensemble_average
from .spinops import LambdaProtocol, build_tfim
from .statevec import imag_backend_error, protocol_propagator

ADIABATIC = LambdaProtocol(50.0, 5000)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def check_tmp_identity(quick: bool = False) -> CheckResult:
    worst = 0.0
    rng = np.random.default_rng(7)
    for n in (2,) if quick else (2, 3):
        model = build_tfim(n)
        U = unitary_group.rvs(1 << n, random_state=rng)
        for beta in (0.5, 1.0, 2.0):
            lhs = exact_tmp_average(model, beta, U)
            rhs = np.exp(-beta * exact_delta_f(model, beta))
            worst = max(worst, abs(lhs - rhs))
    return CheckResult("tmp_identity", worst < 1e-9, f"max |<e^-bW>_TMP - Z1/Z0| = {worst:.2e}")


def _flip(trajs: list[Trajectory]) -> list[Trajectory]:
    return [Trajectory(t.e_final, t.e_initial, t.chain_step, t.kind) for t in trajs]


def check_jensen_adiabatic(quick: bool = False, flip_work: bool = False) -> CheckResult:
    """Adiabatic Jensen chain plus large-beta tightness and the Gram bound."""
    failures = []
    sizes = (2,) if quick else (2, 3)
    seeds = range(2) if quick else range(3)
    samples_per_run = 100 if quick else 200
    for n in sizes:
        model = build_tfim(n, schedule=ADIABATIC)
        U = protocol_propagator(model)
        for beta in (1.0, 5.0, 20.0):
            exact = exact_delta_f(model, beta)
            for seed in seeds:
                cfg = MettsRunConfig(samples=samples_per_run, seed=seed, n_boot=200)
                samples, trajs, est = metts_free_energy(model, beta, cfg, U)
                if flip_work:
                    est = jarzynski_estimate(_flip(trajs), beta, n_boot=200, seed=seed)
                sigma = gram_sigma(samples)
                rep = bound_report(est, sigma, exact, n, beta)
                tag = f"n={n} beta={beta:g} seed={seed}"
                if est.delta_f_tilde < exact - 1e-8:
                    failures.append(f"{tag}: dF_tilde below dF")
                if est.delta_f_tilde > est.mean_work + 4 * est.stderr_mean_work + 1e-12:
                    failures.append(f"{tag}: dF_tilde above <W>")
                if beta == 20.0 and est.delta_f_tilde - exact >= 1e-2:
                    failures.append(f"{tag}: not tight at large beta")
                if sigma > 2 ** n + 1e-9 or rep.bound_residual < -1e-8:
                    failures.append(f"{tag}: Gram bound violated")
    detail = "all runs ordered" if not failures else f"{len(failures)} failures, e.g. {failures[0]}"
    return CheckResult("jensen_adiabatic", not failures, detail)


def check_thermal_energy(quick: bool = False) -> CheckResult:
    worst = 0.0
    count = 1000 if quick else 3000
    for n in (2,) if quick else (2, 3):
        H = build_tfim(n).initial
        for b_idx, beta in enumerate((0.5, 1.0, 2.0)):
            chain = chain_init(H, beta, np.random.SeedSequence(11, spawn_key=(n, b_idx)))
            mean, stderr = ensemble_average(chain.run(count), H)
            worst = max(worst, abs(mean - thermal_energy(H, beta)) / stderr)
    return CheckResult("metts_thermal", worst < 4, f"max deviation {worst:.2f} stderr")


def check_tmp_estimator(quick: bool = False) -> CheckResult:
    model = build_tfim(2, schedule=LambdaProtocol(10.0, 1000))
    beta = 1.0
    sampler = TmpSampler(model, beta)
    trajs = sampler.draw(5000 if quick else 20000, np.random.default_rng(3))
    est = jarzynski_estimate(trajs, beta, n_boot=300, seed=3)
    z = abs(est.delta_f_tilde - exact_delta_f(model, beta)) / est.stderr_delta_f
    return CheckResult("tmp_estimator", z < 4, f"|dF_tilde - dF| = {z:.2f} bootstrap stderr")


def check_imag_backend(quick: bool = False) -> CheckResult:
    H = build_tfim(3).initial
    errs = [imag_backend_error(H, 1.0, d) for d in (0.1, 0.05, 0.01)]
    ok = all(a > b for a, b in zip(errs, errs[1:]))
    return CheckResult("imag_backend", ok, "infidelity " + " > ".join(f"{e:.1e}" for e in errs))


def check_determinism(quick: bool = False) -> CheckResult:
    cfg = load_config(preset="tfim2_paper", overrides={"trajectories": 30, "betas": "1",
                                                      "bootstrap": 50}, environ={})
    with tempfile.TemporaryDirectory() as tmp:
        a, b = Path(tmp, "a"), Path(tmp, "b")
        run_experiment(cfg, a)
        run_experiment(cfg, b)
        same = all(filecmp.cmp(a / f, b / f, shallow=False)
                   for f in ("trajectories.csv", "estimates.csv"))
    return CheckResult("determinism", same, "repeat run byte-identical" if same else "outputs differ")


CHECKS: dict[str, Callable[..., CheckResult]] = {
    "tmp_identity": check_tmp_identity,
    "jensen_adiabatic": check_jensen_adiabatic,
    "metts_thermal": check_thermal_energy,
    "tmp_estimator": check_tmp_estimator,
    "imag_backend": check_imag_backend,
    "determinism": check_determinism,
}
QUICK = ("tmp_identity", "jensen_adiabatic", "imag_backend", "determinism")


def run_checks(quick: bool = False, flip_work: bool = False) -> list[CheckResult]:
    results = []
    for name in QUICK if quick else CHECKS:
        start = time.perf_counter()
        kwargs = {"flip_work": flip_work} if name == "jensen_adiabatic" else {}
        res = CHECKS[name](quick=quick, **kwargs)
        results.append(CheckResult(res.name, res.passed, res.detail, time.perf_counter() - start))
    return results


def format_table(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  result  time(s)  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.seconds:7.2f}  {r.detail}")
    return "\n".join(lines)
