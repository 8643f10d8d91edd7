import numpy as np
import pytest

from toeplitz_ml.errors import CapacityError, DomainError
from toeplitz_ml.matrix import (
    PhaseVector,
    SnapshotSet,
    SymToeplitz,
    build_sinc_model,
    generate_snapshots,
    make_rng,
    sample_covariance,
)
from toeplitz_ml.signs import (
    CriterionKind,
    CriterionSpec,
    SignPattern,
    TrimPolicy,
    dp_branch_search,
    eval_criterion,
    exhaustive_search,
    flippable_lags,
    max_element_search,
    redistribute,
)
from toeplitz_ml.spectrum import ModuliVector
from toeplitz_ml.trim import TrimConfig


def true_inputs(T):
    eigs = np.linalg.eigvalsh(T.dense())[::-1]
    return ModuliVector(np.abs(T.lags)), eigs


def true_pattern(T):
    """Sign pattern of T with numerically zero lags held at +1."""
    neg = T.lags[1:] < -1e-12 * T.lags[0]
    return SignPattern(np.where(neg, -1, 1))


def mixed_pd(rng, n=8):
    """p.d. Toeplitz with mixed-sign lags and a simple spectrum."""
    while True:
        lags = rng.standard_normal(n) * 0.8 ** np.arange(n)
        lags[0] = 0.0
        w = np.linalg.eigvalsh(SymToeplitz(np.concatenate([[1.0], lags[1:]])).dense())
        lags[0] = 1.0 - w[0] + 0.1
        if np.any(lags[1:] < 0) and np.all(np.abs(lags[1:]) > 1e-3):
            return SymToeplitz(lags)


class TestCriteria:
    def test_exact_target(self, sinc17):
        _, eigs = true_inputs(sinc17)
        for kind in ("l2", "minimax"):
            assert eval_criterion(sinc17, CriterionSpec(kind, eigs)) == pytest.approx(0.0, abs=1e-24)

    def test_parse(self):
        assert CriterionKind.parse("minimax") is CriterionKind.MINIMAX
        assert CriterionKind.parse("lr") is CriterionKind.LOGLR
        with pytest.raises(DomainError):
            CriterionKind.parse("nope")

    def test_missing_data(self):
        with pytest.raises(DomainError):
            CriterionSpec("l2")
        with pytest.raises(DomainError):
            CriterionSpec("rho")

    def test_rho_matches_snapshot_sum(self, trial85, sinc17):
        S, _ = trial85
        Tinv = np.linalg.inv(sinc17.dense())
        X = S.snapshots
        D = sum(np.diag(X[:, t].conj()) @ Tinv @ np.diag(X[:, t]) for t in range(X.shape[1])) / X.shape[1]
        w = np.linalg.eigvalsh(D)
        expected = (w[-1] - w[0]) / w.sum()
        assert eval_criterion(sinc17, CriterionSpec("rho", snapshots=S)) == pytest.approx(expected, rel=1e-10)

    def test_rho_zero_iff_flat(self):
        X = np.sqrt(3) * np.eye(3, dtype=complex)
        c = CriterionSpec("rho", snapshots=SnapshotSet(X, 0))
        assert eval_criterion(SymToeplitz([1.0, 0, 0]), c) == pytest.approx(0.0, abs=1e-15)
        assert eval_criterion(SymToeplitz([1.0, 0.3, 0]), c) > 0

    def test_rho_nonnegative_and_phase_invariant(self, trial85, sinc17, rng):
        S, _ = trial85
        base = eval_criterion(sinc17, CriterionSpec("rho", snapshots=S))
        assert base >= 0
        for _ in range(5):
            p = PhaseVector.calibration(17, np.pi, rng)
            Sp = SnapshotSet(p.diag()[:, None] * S.snapshots, S.seed)
            assert eval_criterion(sinc17, CriterionSpec("rho", snapshots=Sp)) == pytest.approx(base, abs=1e-12)

    def test_rho_needs_pd(self, trial85):
        S, _ = trial85
        with pytest.raises(DomainError):
            eval_criterion(SymToeplitz([0.1] + [0.2] * 16), CriterionSpec("rho", snapshots=S))


class TestPatterns:
    def test_odd_flip(self):
        p = SignPattern([1, 1, -1, -1])
        assert p.odd_flip() == SignPattern([-1, 1, 1, -1])
        assert p.odd_flip().odd_flip() == p

    def test_apply(self):
        M = SignPattern([1, -1]).apply(np.array([2.0, 0.5, 0.25]))
        np.testing.assert_array_equal(M.lags, [2.0, 0.5, -0.25])

    def test_rejects_zero(self):
        with pytest.raises(DomainError):
            SignPattern([1, 0])

    def test_flippable(self, sinc17):
        m, _ = true_inputs(sinc17)
        assert list(flippable_lags(m)) == [k for k in range(1, 17) if k not in (5, 10, 15)]


class TestTrueInputReconstruction:
    def test_max_element_recovers_truth(self, sinc17):
        m, eigs = true_inputs(sinc17)
        res = max_element_search(m, CriterionSpec("l2", eigs))
        assert res.pattern == true_pattern(sinc17)
        np.testing.assert_allclose(res.matrix.lags, sinc17.lags, atol=1e-15)
        assert res.score == pytest.approx(0.0, abs=1e-24) and res.pd

    def test_exhaustive_pair(self, sinc17):
        m, eigs = true_inputs(sinc17)
        out = exhaustive_search(m, eigs, 1e-8)
        assert len(out) == 2
        # The partner flips every odd lag; zero-modulus lags stay at +1.
        free = flippable_lags(m) - 1
        t = true_pattern(sinc17)
        assert {tuple(p.signs[free]) for p in out} == {tuple(t.signs[free]), tuple(t.odd_flip().signs[free])}
        assert all(np.all(np.delete(p.signs, free) == 1) for p in out)

    def test_all_positive_no_flips(self):
        T = build_sinc_model(9, 0.05, 0.01)
        assert np.all(T.lags > 0)
        m, eigs = true_inputs(T)
        res = max_element_search(m, CriterionSpec("l2", eigs))
        assert np.all(res.pattern.signs == 1) and res.history == ()

    @staticmethod
    def _optimum_hits(search):
        rng = make_rng(77)
        hits = 0
        for _ in range(100):
            T = mixed_pd(rng)
            m, eigs = true_inputs(T)
            c = CriterionSpec("l2", eigs)
            allp = exhaustive_search(m, eigs, np.inf)
            best = min(eval_criterion(p.apply(m), c) for p in allp)
            hits += search(m, c) <= best + 1e-12
        return hits

    def test_branches_reach_exhaustive_optimum(self):
        hits = self._optimum_hits(lambda m, c: dp_branch_search(m, c)[0].score)
        assert hits >= 90

    @pytest.mark.xfail(strict=True, reason="single greedy path reaches the optimum in about 80% of instances")
    def test_greedy_reaches_exhaustive_optimum(self):
        assert self._optimum_hits(lambda m, c: max_element_search(m, c).score) >= 90

    def test_greedy_monotone(self, trial85):
        _, R = trial85
        from toeplitz_ml.spectrum import redundancy_moduli

        m = redundancy_moduli(R)
        eigs = np.linalg.eigvalsh(R)[::-1]
        c = CriterionSpec("l2", eigs)
        res = max_element_search(m, c)
        signs = np.ones(16, dtype=np.int8)
        prev = eval_criterion(SignPattern(signs).apply(m), c)
        for k in res.history:
            signs[k - 1] = -1
            cur = eval_criterion(SignPattern(signs).apply(m), c)
            assert cur < prev
            prev = cur
        assert prev == pytest.approx(res.score)


class TestBranches:
    def test_all_positive_target(self):
        T = build_sinc_model(8, 0.05, 0.01)
        m, eigs = true_inputs(T)
        out = dp_branch_search(m, CriterionSpec("l2", eigs))
        assert len(out) == 7
        for r in out:
            assert r.history[0] == r.branch_id and r.score >= 0
        # Odd branches can walk to the odd-lag flip, which shares the spectrum.
        assert out[0].pattern == SignPattern(np.ones(7)).odd_flip()
        assert out[0].score == pytest.approx(0.0, abs=1e-24)

    def test_sorted_by_score(self, trial85):
        from toeplitz_ml.spectrum import redundancy_moduli

        _, R = trial85
        m = redundancy_moduli(R)
        out = dp_branch_search(m, CriterionSpec("l2", np.linalg.eigvalsh(R)[::-1]), Rhat=R)
        scores = [r.score for r in out]
        assert scores == sorted(scores)
        assert sorted(r.branch_id for r in out) == list(range(1, 17))

    def test_trim_policy_makes_pd(self, trial85):
        from toeplitz_ml.spectrum import redundancy_moduli

        _, R = trial85
        m = redundancy_moduli(R)
        eigs = np.linalg.eigvalsh(R)[::-1]
        pol = TrimPolicy(TrimConfig(0.01 * eigs[0], expansion_tol=5e-2))
        res = max_element_search(m, CriterionSpec("l2", eigs), trim=pol, Rhat=R)
        assert res.pd and 0 < res.lr < 1
        assert len(pol.cache) > 0


class TestRedistribute:
    def test_locally_optimal_unchanged(self, sinc17):
        m, eigs = true_inputs(sinc17)
        c = CriterionSpec("l2", eigs)
        res = max_element_search(m, c)
        out = redistribute(res, c, m)
        assert out.pattern == res.pattern

    def test_never_worse(self):
        rng = make_rng(3)
        for _ in range(20):
            T = mixed_pd(rng)
            m, eigs = true_inputs(T)
            c = CriterionSpec("l2", eigs)
            c2 = c.with_kind("minimax")
            for r in dp_branch_search(m, c):
                before = eval_criterion(r.matrix, c2)
                assert redistribute(r, c2, m).score <= before + 1e-15


class TestExhaustive:
    def test_zero_moduli(self):
        m = ModuliVector([1.0, 0, 0, 0, 0])
        out = exhaustive_search(m, np.ones(5), 1e-12)
        assert len(out) == 1 and out.enumerated == 1
        full = exhaustive_search(m, np.ones(5), 1e-12, expand_zeros=True)
        assert len(full) == 16 and full.pd_count == 16

    def test_capacity(self):
        with pytest.raises(CapacityError):
            exhaustive_search(ModuliVector(np.ones(21)), np.ones(21), 1e-3)

    def test_naive_moduli_not_pd(self, sinc17):
        from toeplitz_ml.spectrum import redundancy_moduli

        R = sample_covariance(generate_snapshots(sinc17, 85, seed=0))
        out = exhaustive_search(redundancy_moduli(R), np.linalg.eigvalsh(R)[::-1], 1e-8)
        assert out.enumerated == 2 ** 16 and out.pd_count == 0
