import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from slqns import qcore
from slqns.qcore import I2, SM, SP, SX, SY, SZ


def random_density(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def random_lindbladian(rng, d, n_jumps=3):
    h = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = (h + h.conj().T) * 1e5
    jumps = [(rng.uniform(0, 5e4), rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) for _ in range(n_jumps)]
    return qcore.lindbladian(h, jumps)


class TestKron:
    def test_identity(self):
        assert np.array_equal(qcore.kron(I2, I2), np.eye(4))

    def test_sz_identity_diagonal(self):
        assert np.allclose(np.diag(qcore.kron(SZ, I2)), [1, 1, -1, -1])

    def test_double_bit_flip(self):
        assert np.allclose(qcore.kron(SX, SX) @ qcore.ket("0", "0"), qcore.ket("1", "1"))

    def test_embed_matches_kron(self):
        assert np.allclose(qcore.embed(SX, 1, (2, 2, 3)), qcore.kron(I2, SX, np.eye(3)))


class TestVectorization:
    def test_column_stacking(self):
        m = np.arange(4).reshape(2, 2)
        assert np.array_equal(qcore.vec(m), [0, 2, 1, 3])

    def test_sprepost_convention(self, rng):
        a, b, r = (rng.normal(size=(3, 3)) for _ in range(3))
        assert np.allclose(qcore.sprepost(a, b) @ qcore.vec(r), qcore.vec(a @ r @ b))

    def test_dissipator_matches_textbook_form(self, rng):
        j = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        rho = random_density(rng, 3)
        jdj = j.conj().T @ j
        want = j @ rho @ j.conj().T - 0.5 * (jdj @ rho + rho @ jdj)
        assert np.allclose(qcore.unvec(qcore.dissipator(j) @ qcore.vec(rho)), want)

    def test_dissipator_kron_formula(self, rng):
        # D[J] = J* (x) J - 1/2 I (x) J+J - 1/2 (J+J)^T (x) I
        j = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        jdj = j.conj().T @ j
        want = np.kron(j.conj(), j) - 0.5 * np.kron(I2, jdj) - 0.5 * np.kron(jdj.T, I2)
        assert np.allclose(qcore.dissipator(j), want)


class TestLindbladian:
    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError, match="non-physical dissipator rate"):
            qcore.lindbladian(np.zeros((2, 2)), [(-1.0, SM)])

    def test_non_hermitian_hamiltonian_rejected(self):
        with pytest.raises(ValueError, match="Hermitian"):
            qcore.lindbladian(SP)

    def test_zero_generator(self):
        assert np.array_equal(qcore.lindbladian(np.zeros((2, 2))), np.zeros((4, 4)))

    def test_amplitude_damping(self):
        gamma = 3e4
        liouv = qcore.lindbladian(np.zeros((2, 2)), [(gamma, SM)])
        times = np.linspace(0, 1e-4, 7)
        states = qcore.propagate(liouv, qcore.projector(qcore.ket("1")), times)
        assert np.allclose(states[:, 0, 0].real, np.exp(-gamma * times), atol=1e-12)

    def test_amplitude_damping_half_life(self):
        gamma = 2e4
        liouv = qcore.lindbladian(np.zeros((2, 2)), [(gamma, SM)])
        rho = qcore.propagate(liouv, qcore.projector(qcore.ket("1")), [np.log(2) / gamma])[0]
        assert rho[0, 0].real == pytest.approx(0.5, abs=1e-12)

    def test_free_precession(self):
        omega = 2 * np.pi * 1e6
        liouv = qcore.lindbladian(0.5 * omega * SZ)
        rho0 = qcore.projector((qcore.ket("1") + qcore.ket("0")) / np.sqrt(2))
        times = np.linspace(0, 3e-6, 11)
        states = qcore.propagate(liouv, rho0, times)
        assert np.allclose(states[:, 0, 1], 0.5 * np.exp(-1j * omega * times), atol=1e-10)
        assert np.allclose(states[:, 1, 0], 0.5 * np.exp(1j * omega * times), atol=1e-10)

    @given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3, 4]))
    def test_left_null_vector(self, seed, d):
        liouv = random_lindbladian(np.random.default_rng(seed), d)
        assert qcore.left_null_residual(liouv) < 1e-9


class TestPropagate:
    def test_zero_generator_is_static(self, rng):
        rho = random_density(rng, 3)
        out = qcore.propagate(np.zeros((9, 9)), rho, [0, 1e-6, 1e-3])
        assert np.allclose(out, rho[None])

    def test_matches_expm(self, rng):
        liouv = random_lindbladian(rng, 3)
        rho = random_density(rng, 3)
        t = 7e-6
        want = qcore.unvec(scipy.linalg.expm(liouv * t) @ qcore.vec(rho))
        assert np.allclose(qcore.propagate(liouv, rho, [t])[0], want, atol=1e-10)

    @given(st.integers(0, 2**32 - 1))
    def test_semigroup(self, seed):
        rng = np.random.default_rng(seed)
        liouv = random_lindbladian(rng, 2)
        rho = random_density(rng, 2)
        t1, t2 = rng.uniform(0, 1e-4, 2)
        direct = qcore.propagate(liouv, rho, [t1 + t2], raw=True)[0]
        mid = qcore.propagate(liouv, rho, [t1], raw=True)[0]
        step = qcore.propagate(liouv, mid, [t2], raw=True)[0]
        assert np.max(np.abs(direct - step)) < 1e-8

    @given(st.integers(0, 2**32 - 1))
    def test_trace_and_hermiticity_drift(self, seed):
        rng = np.random.default_rng(seed)
        liouv = random_lindbladian(rng, 4)
        rho = random_density(rng, 4)
        raw = qcore.propagate(liouv, rho, np.linspace(0, 200e-6, 9), raw=True)
        assert np.max(np.abs(np.trace(raw, axis1=1, axis2=2) - 1)) < 1e-9
        assert np.max(np.abs(raw - np.conj(np.swapaxes(raw, 1, 2)))) < 1e-9

    def test_rejects_unsorted_and_negative_times(self):
        liouv = np.zeros((4, 4))
        with pytest.raises(ValueError, match="sorted"):
            qcore.propagate(liouv, np.eye(2) / 2, [2e-6, 1e-6])
        with pytest.raises(ValueError, match="non-negative"):
            qcore.propagate(liouv, np.eye(2) / 2, [-1e-6])

    def test_trace_drift_is_an_error(self):
        with pytest.raises(qcore.PropagationError, match="trace"):
            qcore.finalize_state(np.diag([0.6, 0.6]))

    def test_defective_generator_falls_back_to_expm(self):
        # Jordan block: eigenvectors are degenerate, so the spectral path is refused
        liouv = np.zeros((4, 4), dtype=complex)
        liouv[0, 1] = 1e3
        prop = qcore.Propagator(liouv)
        assert not prop.spectral
        v = np.array([0, 1, 0, 0], dtype=complex)
        out = prop.apply(v, [1e-3])
        assert np.allclose(out[0], [1.0, 1.0, 0, 0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            qcore.propagate(np.zeros((16, 16)), np.eye(2) / 2, [0.0])


class TestExpectAndTraces:
    def test_expect_basics(self):
        assert qcore.expect(SZ, qcore.projector(qcore.ket("1"))) == pytest.approx(1.0)
        plus = (qcore.ket("0") + qcore.ket("1")) / np.sqrt(2)
        assert qcore.expect(SX, qcore.projector(plus)) == pytest.approx(1.0)
        assert qcore.expect(np.kron(SZ, SZ), np.eye(4) / 4) == pytest.approx(0.0)

    def test_expect_shape_mismatch(self):
        with pytest.raises(ValueError):
            qcore.expect(SZ, np.eye(4) / 4)

    def test_expect_warns_on_imaginary_part(self):
        with pytest.warns(UserWarning, match="imaginary"):
            qcore.expect(SP, qcore.projector(qcore.ket("0")) + 0.5j * SM)

    def test_partial_trace_product_state(self, rng):
        q = random_density(rng, 2)
        vac = np.zeros((3, 3))
        vac[0, 0] = 1
        assert np.allclose(qcore.partial_trace(np.kron(q, vac), (2, 3), [0]), q)

    def test_partial_trace_bell(self):
        bell = (qcore.ket("0", "0") + qcore.ket("1", "1")) / np.sqrt(2)
        assert np.allclose(qcore.partial_trace(qcore.projector(bell), (2, 2), [1]), I2 / 2)

    def test_partial_trace_expectation_consistency(self, rng):
        rho = random_density(rng, 2 * 2 * 3)
        red = qcore.partial_trace(rho, (2, 2, 3), [0, 1])
        full_op = qcore.embed(SZ, 0, (2, 2, 3))
        assert qcore.expect(np.kron(SZ, I2), red) == pytest.approx(qcore.expect(full_op, rho), abs=1e-12)

    def test_partial_trace_bad_dims(self):
        with pytest.raises(ValueError):
            qcore.partial_trace(np.eye(4) / 4, (2, 3), [0])


class TestStates:
    def test_ket_convention(self):
        # index 0 is the +1 eigenstate of sigma_z (lab |1>) and of tau_z (dressed |+x>)
        assert np.allclose(qcore.ket("1"), [1, 0])
        assert np.allclose(qcore.ket("-x"), [0, 1])

    def test_density_checks(self):
        qcore.check_density_matrix(np.eye(2) / 2)
        with pytest.raises(ValueError):
            qcore.check_density_matrix(np.diag([1.2, -0.2]))

    def test_steady_state_amplitude_damping(self):
        liouv = qcore.lindbladian(SZ, [(1e4, SM)])
        assert np.allclose(qcore.steady_state(liouv), qcore.projector(qcore.ket("0")), atol=1e-10)

    def test_steady_state_degenerate_is_error(self):
        with pytest.raises(qcore.PropagationError, match="not unique"):
            qcore.steady_state(np.zeros((4, 4)))

    def test_destroy(self):
        a = qcore.destroy(4)
        assert np.allclose(np.diag(a.conj().T @ a), [0, 1, 2, 3])
        assert np.allclose(SY, -1j * (SP - SM))
