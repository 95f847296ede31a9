import numpy as np
import pytest

from jarzmetts.exact_thermo import thermal_energy
from jarzmetts.metts import (DEFAULT_WARMUP, chain_init, chain_next, collapse_basis,
                             ensemble_average)
from jarzmetts.spinops import PauliOperator, build_tfim
from jarzmetts.statevec import fidelity


def test_basis_alternation():
    assert [collapse_basis(k) for k in (1, 2, 3, 4)] == ["z", "x", "z", "x"]
    chain = chain_init(build_tfim(2).base, 1.0, 0)
    chain.run(3)
    assert [s.collapse_basis for s in chain.samples[:4]] == ["z", "x", "z", "x"]


def test_same_seed_same_chain():
    H = build_tfim(3).base
    a = chain_init(H, 1.0, 42).run(20)
    b = chain_init(H, 1.0, 42).run(20)
    assert [s.source_cps for s in a] == [s.source_cps for s in b]
    assert all(np.array_equal(x.state, y.state) for x, y in zip(a, b))


def test_initial_cps_uniform():
    H = build_tfim(1).base
    ups = sum(chain_init(H, 1.0, seed).current_cps.labels[0] == "z+" for seed in range(10_000))
    assert abs(ups / 10_000 - 0.5) < 0.02


def test_warmup_excluded():
    chain = chain_init(build_tfim(2).base, 1.0, 3)
    assert chain.warmup == DEFAULT_WARMUP == 5
    kept = chain.run(10)
    assert len(chain.samples) == 15
    assert [s.chain_step for s in kept] == list(range(5, 15))


def test_rejects_nonpositive_beta():
    with pytest.raises(ValueError):
        chain_init(build_tfim(2).base, 0.0, 0)


def test_tiny_beta_keeps_cps():
    chain = chain_init(build_tfim(3).base, 1e-8, 1)
    for _ in range(6):
        s = chain_next(chain)
        assert fidelity(s.state, s.source_cps.to_vector()) > 1 - 1e-8
        assert s.weight > 0


def test_diagonal_hamiltonian_z_steps_fixed():
    H = PauliOperator(3, ((1.0, "ZZI"), (0.7, "IZZ"), (0.3, "ZII")))
    chain = chain_init(H, 1.0, 5)
    chain.run(20)
    for prev, nxt in zip(chain.samples, chain.samples[1:]):
        if prev.collapse_basis == "z" and prev.source_cps.basis == "z":
            # the z-collapse of a z-eigenstate reproduces it
            assert nxt.source_cps == prev.source_cps
    # x steps are what move the chain
    assert len({s.source_cps for s in chain.samples if s.source_cps.basis == "z"}) > 1


def test_trotter_backend_close_to_exact():
    H = build_tfim(3).base
    exact = chain_init(H, 1.0, 9)
    approx = chain_init(H, 1.0, 9, dbeta=1e-3)
    assert approx.imag_backend == "trotter(0.001)"
    for _ in range(6):
        cps = exact.current_cps
        approx.current_cps = cps
        a, b = chain_next(exact), chain_next(approx)
        assert fidelity(a.state, b.state) >= 1 - 1e-5


def test_thermal_energy_tfim2():
    H = build_tfim(2).base
    mean, err = ensemble_average(chain_init(H, 1.0, 21).run(2000), H)
    assert abs(mean - thermal_energy(H, 1.0)) < 3 * err


def test_identity_observable():
    samples = chain_init(build_tfim(2).base, 1.0, 0).run(5)
    avg = ensemble_average(samples, PauliOperator.identity(2))
    assert avg.mean == pytest.approx(1.0)
    assert avg.stderr == pytest.approx(0.0, abs=1e-15)
    assert len(avg.running) == 5


def test_halves_agree():
    H = build_tfim(3).base
    samples = chain_init(H, 0.5, 8).run(2000)
    m1, e1 = ensemble_average(samples[:1000], H)
    m2, e2 = ensemble_average(samples[1000:], H)
    assert abs(m1 - m2) < 4 * np.hypot(e1, e2)


def test_ensemble_needs_two_samples():
    samples = chain_init(build_tfim(2).base, 1.0, 0).run(1)
    with pytest.raises(ValueError):
        ensemble_average(samples, build_tfim(2).base)


def test_transform_applied():
    m = build_tfim(2)
    samples = chain_init(m.initial, 1.0, 0).run(4)
    flip = lambda psi: psi[::-1]
    a = ensemble_average(samples, PauliOperator(2, ((1.0, "ZI"),)), flip)
    b = ensemble_average(samples, PauliOperator(2, ((-1.0, "ZI"),)))
    assert a.mean == pytest.approx(b.mean)


def test_write_trace(tmp_path):
    chain = chain_init(build_tfim(2).base, 1.0, 0)
    chain.run(3)
    chain.write_trace(tmp_path / "trace.csv")
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    assert lines[0] == "step,basis,cps,e_initial"
    assert len(lines) == 1 + 8


@pytest.mark.slow
@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_thermal_energy_matches_oracle(n, beta):
    H = build_tfim(n).base
    mean, err = ensemble_average(chain_init(H, beta, 100 + n).run(5000), H)
    assert abs(mean - thermal_energy(H, beta)) < 4 * err
