import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jarzmetts.spinops import (DrivenHamiltonian, LambdaProtocol, PauliOperator, SizeLimitError,
                               build_heisenberg, build_tfim, lambda_at, to_dense)

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2, dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}


def kron_label(label):
    out = np.array([[1.0 + 0j]])
    for p in label:
        out = np.kron(out, PAULI[p])
    return out


labels = st.integers(1, 4).flatmap(
    lambda n: st.lists(st.tuples(st.floats(-3, 3, allow_nan=False),
                                 st.text("IXYZ", min_size=n, max_size=n)), max_size=8)
    .map(lambda terms: (n, terms)))


class TestPauliOperator:
    def test_merges_and_drops_zeros(self):
        op = PauliOperator(2, ((1.0, "XZ"), (2.0, "XZ"), (0.5, "ZZ"), (-0.5, "ZZ"), (0.0, "YY")))
        assert op.terms == ((3.0, "XZ"),)

    def test_rejects_bad_labels(self):
        with pytest.raises(ValueError):
            PauliOperator(2, ((1.0, "XA"),))
        with pytest.raises(ValueError):
            PauliOperator(2, ((1.0, "XXX"),))
        with pytest.raises(ValueError):
            PauliOperator(0)

    def test_arithmetic(self):
        a = PauliOperator(1, ((1.0, "X"),))
        b = PauliOperator(1, ((2.0, "Z"),))
        assert (a + b - b) == a
        assert (2 * a).coefficient("X") == 2.0
        assert (a - a).is_zero

    @given(labels, st.randoms())
    @settings(max_examples=60, deadline=None)
    def test_canonicalization_idempotent_and_order_free(self, data, rnd):
        n, terms = data
        op = PauliOperator(n, tuple(terms))
        assert PauliOperator(n, op.terms) == op
        shuffled = list(terms)
        rnd.shuffle(shuffled)
        assert PauliOperator(n, tuple(shuffled)).labels == op.labels
        for lab in op.labels:
            assert PauliOperator(n, tuple(shuffled)).coefficient(lab) == pytest.approx(op.coefficient(lab))

    @given(labels)
    @settings(max_examples=60, deadline=None)
    def test_dense_matches_kronecker_and_is_hermitian(self, data):
        n, terms = data
        op = PauliOperator(n, tuple(terms))
        ref = sum((c * kron_label(lab) for c, lab in op.terms), np.zeros((1 << n, 1 << n), complex))
        mat = to_dense(op)
        np.testing.assert_allclose(mat, ref, atol=1e-12)
        np.testing.assert_allclose(mat, mat.conj().T, atol=1e-12)

    @given(labels, st.integers(0, 2**31))
    @settings(max_examples=40, deadline=None)
    def test_apply_matches_dense(self, data, seed):
        n, terms = data
        op = PauliOperator(n, tuple(terms))
        rng = np.random.default_rng(seed)
        psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        np.testing.assert_allclose(op.apply(psi), to_dense(op) @ psi, atol=1e-10)


class TestToDense:
    def test_single_x(self):
        np.testing.assert_array_equal(to_dense(PauliOperator(1, ((1.0, "X"),))), X)

    def test_zz(self):
        np.testing.assert_array_equal(to_dense(PauliOperator(2, ((1.0, "ZZ"),))).diagonal(),
                                      [1, -1, -1, 1])

    def test_site_one_is_most_significant(self):
        # Z on site 1 flips sign on the upper half of the basis
        mat = to_dense(PauliOperator.single(2, 1.0, {0: "Z"}))
        np.testing.assert_array_equal(mat.diagonal().real, [1, 1, -1, -1])

    def test_tfim_base_traceless(self):
        assert abs(np.trace(to_dense(build_tfim(2).base))) < 1e-12

    def test_size_limit(self):
        with pytest.raises(SizeLimitError):
            to_dense(PauliOperator.identity(13))


class TestBuilders:
    def test_tfim_two_sites(self):
        m = build_tfim(2, 1.0, 1.0)
        assert dict((lab, c) for c, lab in m.base.terms) == {"ZZ": 1.0, "XI": 1.0, "IX": 1.0}
        assert dict((lab, c) for c, lab in m.drive.terms) == {"XI": 0.5, "IX": 0.5}

    def test_tfim_single_site(self):
        m = build_tfim(1)
        assert m.base.terms == ((1.0, "X"),)
        assert m.drive.terms == ((0.5, "X"),)

    def test_tfim_rejects_zero_sites(self):
        with pytest.raises(ValueError):
            build_tfim(0)

    def test_tfim_final_dense(self):
        m = build_tfim(3)
        sx = sum(kron_label(lab) for lab in ("XII", "IXI", "IIX"))
        np.testing.assert_allclose(to_dense(m.final), to_dense(m.initial) + 0.5 * sx, atol=1e-12)
        zz = kron_label("ZZI") + kron_label("IZZ")
        np.testing.assert_allclose(to_dense(m.final), zz + 1.5 * sx, atol=1e-12)

    def test_heisenberg_two_site_terms(self):
        drive = PauliOperator(2, ((0.5, "XI"), (0.5, "IX")))
        m = build_heisenberg(2, (1, 1, 1), (0, 0, 0), drive)
        assert sorted(m.base.labels) == ["XX", "YY", "ZZ"]

    def test_heisenberg_reduces_to_tfim(self):
        tfim = build_tfim(2, 1, 1)
        heis = build_heisenberg(2, (0, 0, 1), (1, 0, 0), tfim.drive)
        assert heis.base == tfim.base

    def test_heisenberg_five_sites_hermitian(self):
        m = build_heisenberg(5, (1, 1, 1), (1, 0, 0))
        mat = to_dense(m.final)
        np.testing.assert_allclose(mat, mat.conj().T, atol=1e-12)
        assert np.all(np.isreal(np.linalg.eigvalsh(mat)))

    def test_heisenberg_rejects_one_site(self):
        with pytest.raises(ValueError):
            build_heisenberg(1)

    @pytest.mark.parametrize("builder", [lambda: build_tfim(3, 0.7, 1.3),
                                         lambda: build_heisenberg(3, (1, 0.5, 2), (0.1, 0, 1))])
    def test_linear_in_lambda(self, builder):
        m = builder()
        half = m.at(0.5)
        mid = 0.5 * (m.at(0.0) + m.at(1.0))
        assert half.labels == mid.labels
        for lab in half.labels:
            assert half.coefficient(lab) == pytest.approx(mid.coefficient(lab), abs=1e-14)
        assert m.at(0.0) == m.base
        assert m.at(1.0) == m.base + m.drive


class TestLambdaProtocol:
    @pytest.mark.parametrize("t, lam", [(0, 0.0), (10, 1.0), (5, 0.5)])
    def test_linear(self, t, lam):
        assert lambda_at(LambdaProtocol(10.0), t) == lam

    @pytest.mark.parametrize("t", [-0.1, 10.1])
    def test_outside_range(self, t):
        with pytest.raises(ValueError):
            lambda_at(LambdaProtocol(10.0), t)

    def test_step_lambdas_monotone_and_end_at_one(self):
        lams = LambdaProtocol(3.0, 7).step_lambdas()
        assert np.all(np.diff(lams) > 0)
        assert lams[-1] == 1.0

    @pytest.mark.parametrize("kwargs", [dict(total_time=0), dict(total_time=1, num_steps=0),
                                        dict(total_time=1, shape="cosine")])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            LambdaProtocol(**kwargs)

    def test_driven_hamiltonian_size_mismatch(self):
        with pytest.raises(ValueError):
            DrivenHamiltonian(PauliOperator.identity(2), PauliOperator.identity(3))
