import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from jarzmetts.exact_thermo import diagonalize
from jarzmetts.spinops import LambdaProtocol, PauliOperator, build_tfim, to_dense
from jarzmetts.statevec import (ImagTimePropagator, ProductState, basis_probabilities, basis_state,
                                collapse, expectation, fidelity, imag_backend_error, propagate_imag,
                                propagate_real_trotter, protocol_propagator)

PLUS = np.array([1, 1]) / np.sqrt(2)


def random_state(n, rng):
    psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return psi / np.linalg.norm(psi)


class TestProductState:
    def test_labels_and_vector(self):
        ps = ProductState(("z+", "x-"))
        np.testing.assert_allclose(ps.to_vector(), np.kron([1, 0], [1, -1] / np.sqrt(2)))
        assert ps.basis == "mixed"

    def test_index_roundtrip(self):
        for i in range(8):
            assert ProductState.from_index(i, 3, "x").index() == i

    def test_rejects_unknown_label(self):
        with pytest.raises(ValueError):
            ProductState(("y+",))


class TestExpectation:
    def test_eigenstates(self):
        assert expectation(np.array([1, 0]), PauliOperator(1, ((1.0, "Z"),))) == 1.0
        assert expectation(PLUS, PauliOperator(1, ((1.0, "X"),))) == pytest.approx(1.0)

    def test_ground_state(self):
        spec = diagonalize(build_tfim(2).base)
        assert expectation(spec.eigenvectors[:, 0], build_tfim(2).base) == pytest.approx(
            spec.eigenvalues[0], abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            expectation(np.ones(4) / 2, PauliOperator(1, ((1.0, "Z"),)))


class TestImaginaryTime:
    def test_zero_beta_is_identity(self):
        psi = random_state(2, np.random.default_rng(0))
        out, w = propagate_imag(psi, build_tfim(2).base, 0.0)
        np.testing.assert_allclose(out, psi)
        assert w == pytest.approx(1.0)

    def test_eigenstate_scaling(self):
        H = build_tfim(3).base
        spec = diagonalize(H)
        for k in (0, 3, 7):
            v = spec.eigenvectors[:, k]
            out, w = propagate_imag(v, H, 0.35)
            assert fidelity(out, v) == pytest.approx(1.0, abs=1e-12)
            assert w == pytest.approx(np.exp(-0.7 * spec.eigenvalues[k]), rel=1e-10)

    def test_weight_is_diagonal_element(self):
        H = build_tfim(3).base
        rho = expm(-1.3 * to_dense(H))
        for i in range(8):
            _, w = propagate_imag(basis_state(i, 3), H, 0.65)
            assert w == pytest.approx(rho[i, i].real, abs=1e-9)

    def test_negative_beta_rejected(self):
        with pytest.raises(ValueError):
            propagate_imag(np.array([1, 0]), build_tfim(1).base, -0.1)

    def test_step_backend_converges(self):
        H = build_tfim(3).base
        assert imag_backend_error(H, 1.0, 1e-3) < 1e-6

    def test_step_backend_slices(self):
        prop = ImagTimePropagator(build_tfim(2).base, 0.5, 0.1)
        assert prop.num_slices == 10
        assert prop.backend == "trotter(0.1)"

    @given(st.integers(0, 2**31), st.floats(0.05, 3.0))
    @settings(max_examples=25, deadline=None)
    def test_output_normalized(self, seed, beta_half):
        psi = random_state(3, np.random.default_rng(seed))
        for dbeta in (None, 0.2):
            out, w = propagate_imag(psi, build_tfim(3).base, beta_half, dbeta)
            assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-10)
            assert w > 0


class TestRealTime:
    def test_zero_drive_single_exponential(self):
        m = build_tfim(2)
        m = type(m)(m.base, PauliOperator.zero(2), LambdaProtocol(2.0, 17))
        np.testing.assert_allclose(protocol_propagator(m), expm(-2j * to_dense(m.base)), atol=1e-10)

    def test_step_ordering_earliest_first(self):
        m = build_tfim(2, schedule=LambdaProtocol(0.6, 3))
        U = np.eye(4)
        for lam in (1 / 3, 2 / 3, 1.0):
            U = expm(-0.2j * to_dense(m.at(lam))) @ U
        np.testing.assert_allclose(protocol_propagator(m), U, atol=1e-12)

    def test_first_order_convergence(self):
        base = build_tfim(3)
        psi = random_state(3, np.random.default_rng(1))

        def run(steps):
            return propagate_real_trotter(psi, base.with_schedule(LambdaProtocol(1.0, steps)))

        ref = run(400)
        e1 = np.linalg.norm(run(20) - ref)
        e2 = np.linalg.norm(run(40) - ref)
        assert 0.4 < e2 / e1 < 0.6

    def test_short_time_is_identity(self):
        m = build_tfim(3, schedule=LambdaProtocol(1e-12, 4))
        np.testing.assert_allclose(protocol_propagator(m), np.eye(8), atol=1e-10)

    def test_propagator_read_only(self):
        U = protocol_propagator(build_tfim(2, schedule=LambdaProtocol(1.0, 3)))
        with pytest.raises(ValueError):
            U[0, 0] = 0

    @given(st.integers(0, 2**31), st.floats(0.01, 5.0), st.integers(1, 20))
    @settings(max_examples=25, deadline=None)
    def test_norm_and_constant_energy(self, seed, tau, steps):
        psi = random_state(3, np.random.default_rng(seed))
        m = build_tfim(3, schedule=LambdaProtocol(tau, steps))
        assert np.linalg.norm(propagate_real_trotter(psi, m)) == pytest.approx(1.0, abs=1e-10)
        frozen = type(m)(m.base, PauliOperator.zero(3), m.schedule)
        out = propagate_real_trotter(psi, frozen)
        assert expectation(out, m.base) == pytest.approx(expectation(psi, m.base), abs=1e-8)


class TestCollapse:
    def test_basis_states_are_certain(self):
        rng = np.random.default_rng(0)
        assert collapse(basis_state(0, 2), "z", rng) == ProductState(("z+", "z+"))
        assert collapse(np.kron(PLUS, PLUS), "x", rng) == ProductState(("x+", "x+"))

    def test_x_collapse_of_zero_is_fair(self):
        rng = np.random.default_rng(1)
        hits = sum(collapse(np.array([1.0, 0.0]), "x", rng).labels[0] == "x+" for _ in range(10_000))
        assert abs(hits / 10_000 - 0.5) < 0.02

    @pytest.mark.parametrize("basis", ["z", "x"])
    def test_born_frequencies(self, basis):
        rng = np.random.default_rng(2)
        psi = random_state(3, rng)
        p = basis_probabilities(psi, basis)
        draws = 20_000
        counts = np.bincount([collapse(psi, basis, rng).index() for _ in range(draws)], minlength=8)
        sigma = np.sqrt(draws * p * (1 - p))
        assert np.all(np.abs(counts - draws * p) <= 4 * sigma + 1)

    def test_probabilities_sum_to_one(self):
        psi = random_state(4, np.random.default_rng(3))
        for basis in ("z", "x"):
            assert basis_probabilities(psi, basis).sum() == pytest.approx(1.0)
