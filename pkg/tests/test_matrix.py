import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toeplitz_ml.errors import DomainError
from toeplitz_ml.matrix import (
    HermToeplitz,
    PhaseVector,
    SnapshotSet,
    SymToeplitz,
    apply_phase,
    build_sinc_model,
    eigh,
    generate_snapshots,
    likelihood_ratio,
    likelihood_ratio_eig,
    log_likelihood_ratio,
    make_rng,
    sample_covariance,
    sigma2_ml,
    to_dense,
)

from conftest import random_hpd, random_pd_toeplitz

REFERENCE_LAGS = [0.21, 0.1871, 0.1514, 0.1009, 0.0468, 0.0, -0.0312, -0.0432, -0.0378,
                  -0.0208, 0.0, 0.0170, 0.0252, 0.0233, 0.0134, 0.0, -0.0117]
REFERENCE_EIGS = [1.0097, 0.9991, 0.8763, 0.4573, 0.0996, 0.0175, 0.0104] + [0.0100] * 10


class TestSincModel:
    def test_leading_lags(self, sinc17):
        assert sinc17.lags[0] == pytest.approx(0.21, abs=1e-15)
        assert round(sinc17.lags[1], 4) == 0.1871
        assert abs(sinc17.lags[5]) < 1e-15

    def test_reference_lags(self, sinc17):
        np.testing.assert_allclose(sinc17.lags, REFERENCE_LAGS, atol=5e-5)

    def test_reference_eigenvalues(self, sinc17):
        np.testing.assert_allclose(eigh(sinc17).values, REFERENCE_EIGS, atol=5e-5)

    def test_model_parameters_kept(self, sinc17):
        assert sinc17.W2 == 0.1 and sinc17.sigma2 == 0.01

    @pytest.mark.parametrize("args", [(1, 0.1, 0.01), (17, 0.0, 0.01), (17, 0.5, 0.01), (17, 0.1, 0.0)])
    def test_bad_parameters(self, args):
        with pytest.raises(DomainError):
            build_sinc_model(*args)


class TestToeplitzTypes:
    def test_identity(self):
        np.testing.assert_array_equal(to_dense(SymToeplitz([1.0, 0, 0, 0])), np.eye(4))

    def test_dense_first_row_roundtrip(self, sinc17):
        A = to_dense(sinc17)
        np.testing.assert_array_equal(A[0], sinc17.lags)
        np.testing.assert_array_equal(A, A.T)
        for i in range(17):
            for j in range(17):
                assert A[i, j] == sinc17.lags[abs(i - j)]

    def test_lags_read_only(self, sinc17):
        with pytest.raises(ValueError):
            sinc17.lags[0] = 1.0

    @pytest.mark.parametrize("lags", [[1.0], [0.0, 0.1], [-1.0, 0.0], [1.0, np.nan]])
    def test_invalid_lags(self, lags):
        with pytest.raises(DomainError):
            SymToeplitz(lags)

    def test_hermitian_dense(self, rng):
        H = HermToeplitz(2.0, rng.standard_normal(4) + 1j * rng.standard_normal(4))
        A = H.dense()
        np.testing.assert_array_equal(A, A.conj().T)
        np.testing.assert_array_equal(A[0, 1:], H.lags)
        assert A[3, 1] == np.conj(H.lags[1])

    def test_from_symmetric(self, sinc17):
        np.testing.assert_array_equal(HermToeplitz.from_symmetric(sinc17).dense(), sinc17.dense())

    def test_normalized_and_scaled(self, sinc17):
        assert sinc17.normalized().lags[0] == 1.0
        np.testing.assert_allclose(sinc17.scaled(3.0).lags, 3.0 * sinc17.lags)


class TestEigh:
    def test_identity(self):
        np.testing.assert_array_equal(eigh(np.eye(5)).values, np.ones(5))

    def test_descending(self):
        np.testing.assert_array_equal(eigh(np.diag([3.0, 1.0, 2.0])).values, [3.0, 2.0, 1.0])

    def test_reconstruction(self, rng):
        M = random_hpd(rng, 9)
        es = eigh(M)
        U, lam = es.vectors, es.values
        assert np.all(np.diff(lam) <= 0)
        R = U @ np.diag(lam) @ U.conj().T
        assert np.linalg.norm(M - R) / np.linalg.norm(M) <= 1e-10
        np.testing.assert_allclose(U.conj().T @ U, np.eye(9), atol=1e-12)


class TestPhase:
    def test_zero_phase_identity(self, sinc17):
        np.testing.assert_array_equal(apply_phase(sinc17, PhaseVector.zeros(17)), sinc17.dense())

    def test_alternating_phase_flips_odd_lags(self, sinc17):
        out = apply_phase(sinc17, PhaseVector(np.arange(17) * np.pi))
        k = np.arange(17)
        np.testing.assert_allclose(out.imag, 0.0, atol=1e-12)
        np.testing.assert_allclose(out[0].real, sinc17.lags * (-1.0) ** k, atol=1e-15)

    def test_angles_wrapped(self):
        p = PhaseVector([0.0, 3 * np.pi, -np.pi, 2 * np.pi + 0.5])
        assert np.all(p.angles > -np.pi) and np.all(p.angles <= np.pi)
        np.testing.assert_allclose(p.angles, [0.0, np.pi, np.pi, 0.5], atol=1e-12)

    def test_reference_angle(self):
        with pytest.raises(DomainError):
            PhaseVector([0.3, 0.0])

    def test_calibration_bound(self, rng):
        p = PhaseVector.calibration(17, 0.2, rng)
        assert p.angles[0] == 0.0 and np.max(np.abs(p.angles)) <= 0.2

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_invariance(self, seed):
        rng = make_rng(seed)
        T = build_sinc_model(17, 0.1, 0.01)
        p = PhaseVector.calibration(17, np.pi, rng).compose(PhaseVector.steering(17, rng.uniform(-1, 1)))
        out = apply_phase(T, p)
        np.testing.assert_allclose(np.abs(out), np.abs(T.dense()), rtol=1e-12, atol=1e-15)
        w0 = eigh(T).values
        np.testing.assert_allclose(eigh(out).values, w0, rtol=0, atol=1e-12 * w0[0])

    def test_size_mismatch(self, sinc17):
        with pytest.raises(DomainError):
            apply_phase(sinc17, PhaseVector.zeros(5))


class TestSnapshots:
    def test_deterministic(self, sinc17):
        a = generate_snapshots(sinc17, 50, seed=7)
        b = generate_snapshots(sinc17, 50, seed=7)
        assert a.seed == 7 and a.n == 17 and a.t == 50
        assert a.snapshots.tobytes() == b.snapshots.tobytes()

    def test_seed_changes_draw(self, sinc17):
        a = generate_snapshots(sinc17, 5, seed=1)
        b = generate_snapshots(sinc17, 5, seed=2)
        assert not np.array_equal(a.snapshots, b.snapshots)

    def test_identity_law_of_large_numbers(self):
        S = generate_snapshots(SymToeplitz([1.0, 0, 0]), 10**6, seed=0)
        assert np.max(np.abs(sample_covariance(S) - np.eye(3))) < 0.01

    def test_rejects_non_pd(self):
        with pytest.raises(DomainError):
            generate_snapshots(SymToeplitz([1.0, 2.0]), 10)

    def test_alternating_phase_statistics(self, sinc17):
        S0 = generate_snapshots(sinc17, 85, seed=11)
        S1 = generate_snapshots(sinc17, 85, PhaseVector(np.arange(17) * np.pi), seed=11)
        R0, R1 = sample_covariance(S0), sample_covariance(S1)
        np.testing.assert_allclose(np.abs(R1), np.abs(R0), rtol=1e-12)
        np.testing.assert_allclose(eigh(R1).values, eigh(R0).values, atol=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            SnapshotSet(np.zeros((3, 0)), 0)


class TestSampleCovariance:
    def test_rank_one(self, rng):
        x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        R = sample_covariance(x[:, None])
        np.testing.assert_allclose(R, np.outer(x, x.conj()), atol=1e-15)
        assert np.linalg.matrix_rank(R) == 1

    def test_identity_stub(self):
        n = 6
        R = sample_covariance(np.sqrt(n) * np.eye(n))
        np.testing.assert_allclose(R, np.eye(n), atol=1e-15)

    def test_hermitian_psd(self, trial85):
        _, R = trial85
        np.testing.assert_array_equal(R, R.conj().T)
        assert np.linalg.eigvalsh(R)[0] > 0

    def test_error_rate(self, sinc17):
        Ts = np.array([100, 400, 1600])
        errs = []
        for T in Ts:
            e = [np.linalg.norm(sample_covariance(generate_snapshots(sinc17, int(T), seed=s)) - sinc17.dense())
                 for s in range(40)]
            errs.append(np.mean(e))
        slope = np.polyfit(np.log(Ts), np.log(errs), 1)[0]
        assert abs(slope + 0.5) <= 0.1


class TestLikelihoodRatio:
    def test_equal_matrices(self, rng):
        R = random_pd_toeplitz(rng, 6)
        T = SymToeplitz(R)
        assert likelihood_ratio(T.dense(), T) == pytest.approx(1.0, abs=1e-12)

    def test_scale_invariance(self, trial85, sinc17):
        _, R = trial85
        base = log_likelihood_ratio(R, sinc17)
        for c in (1e-3, 0.5, 7.0, 1e4):
            assert log_likelihood_ratio(R, sinc17.scaled(c)) == pytest.approx(base, rel=1e-12)
            assert log_likelihood_ratio(c * R, sinc17.scaled(c)) == pytest.approx(base, rel=1e-12)

    def test_range(self, trial85, sinc17):
        _, R = trial85
        lr = likelihood_ratio(R, sinc17)
        assert 0 < lr < 1

    def test_eigen_form_agrees(self, rng):
        for _ in range(20):
            R = random_hpd(rng, 8)
            T = SymToeplitz(random_pd_toeplitz(rng, 8))
            assert likelihood_ratio_eig(R, T) == pytest.approx(likelihood_ratio(R, T), rel=1e-9)

    def test_oracle_determinant_form(self, rng):
        R = random_hpd(rng, 5)
        T = SymToeplitz(random_pd_toeplitz(rng, 5))
        M = R @ np.linalg.inv(T.dense())
        direct = np.real(np.linalg.det(M)) / (np.real(np.trace(M)) / 5) ** 5
        assert likelihood_ratio(R, T) == pytest.approx(direct, rel=1e-10)

    def test_large_sample_near_one(self, sinc17):
        R = sample_covariance(generate_snapshots(sinc17, 17000, seed=0))
        assert 0.95 <= likelihood_ratio(R, sinc17) <= 1.0

    def test_singular_rejected(self, sinc17):
        x = np.ones((17, 1), dtype=complex)
        with pytest.raises(DomainError):
            likelihood_ratio(sample_covariance(x), sinc17)


class TestSigma2:
    def test_scaled_identity(self):
        assert sigma2_ml(4 * np.eye(3), SymToeplitz([1.0, 0, 0])) == pytest.approx(4.0)

    def test_diagonal(self):
        assert sigma2_ml(np.diag([2.0, 4.0]), SymToeplitz([1.0, 0.0])) == pytest.approx(3.0)

    def test_requires_unit_diagonal(self):
        with pytest.raises(DomainError):
            sigma2_ml(np.eye(2), SymToeplitz([2.0, 0.0]))

    def test_large_sample(self, sinc17):
        R = sample_covariance(generate_snapshots(sinc17, 10**4, seed=5))
        assert sigma2_ml(R, sinc17.normalized()) == pytest.approx(sinc17.lags[0], rel=0.02)
