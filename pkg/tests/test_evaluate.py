import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ggs.data import SyntheticSpec, generate_synthetic
from ggs.errors import ConfigError, DimensionError, IndexBoundsError
from ggs.evaluate import (
    SegmentModel,
    cross_validate,
    fit_models,
    heldout_loglik,
    loglik_point,
    make_folds,
    remap,
    train_loglik,
)
from ggs.segment import ggs
from ggs.stats import RegularizedCov, objective

from oracles import DenseObjective, dense_loglik, naive_cov


def model(mu, sigma, start=1, end=2):
    sigma = np.asarray(sigma, dtype=float)
    L = np.linalg.cholesky(sigma)
    inv = np.linalg.inv(sigma)
    return SegmentModel(start, end, np.asarray(mu, dtype=float),
                        RegularizedCov(sigma, L, float(np.log(np.diag(L)).sum()), float(np.trace(inv))))


class TestFitModels:
    def test_constant_series(self):
        x = np.full((20, 3), 7.0)
        seg = fit_models(x, [], 4.0)
        (s,) = seg.segments
        np.testing.assert_allclose(s.mu, 7.0)
        np.testing.assert_allclose(s.sigma.sigma, (4.0 / 20) * np.eye(3), atol=1e-14)

    def test_shrinkage_on_true_segments(self, benchmark0):
        x, truth = benchmark0
        seg = fit_models(x, truth, 10.0)
        assert len(seg.segments) == 10
        for s in seg.segments:
            assert s.length == 100
            _, S = naive_cov(x[s.start - 1 : s.end - 1])
            np.testing.assert_allclose(s.sigma.sigma - S, 0.1 * np.eye(25), atol=1e-9)

    def test_objective_consistent(self, rng):
        x = rng.standard_normal((60, 2)) * np.r_[np.ones(30), 3 * np.ones(30)][:, None]
        b = [17, 31]
        seg = fit_models(x, b, 0.5)
        assert seg.objective == pytest.approx(objective(x, b, 0.5), abs=1e-9)
        assert seg.objective == pytest.approx(DenseObjective(x, 0.5)(b), abs=1e-9)

    def test_segment_lookup(self, rng):
        seg = fit_models(rng.standard_normal((30, 1)), [10, 20], 1.0)
        assert [seg.segment_index(t) for t in (1, 9, 10, 19, 20, 30)] == [0, 0, 1, 1, 2, 2]
        assert seg.model_at(25).start == 20
        for t in (0, 31):
            with pytest.raises(IndexBoundsError):
                seg.segment_index(t)


class TestLoglik:
    def test_standard_normal_at_mean(self):
        assert loglik_point([0.0], model([0.0], [[1.0]])) == pytest.approx(-0.918939, abs=1e-6)

    def test_unit_distance_in_2d(self):
        v = loglik_point([1.0, 0.0], model([0.0, 0.0], np.eye(2)))
        assert v == pytest.approx(-0.5 - math.log(2 * math.pi), abs=1e-12)

    def test_against_dense(self, rng):
        A = rng.standard_normal((4, 4))
        sigma = A @ A.T + 0.1 * np.eye(4)
        mu = rng.standard_normal(4)
        m = model(mu, sigma)
        for _ in range(10):
            x = rng.standard_normal(4) * 3
            assert loglik_point(x, m) == pytest.approx(dense_loglik(x, mu, sigma), abs=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            loglik_point([1.0, 2.0], model([0.0], [[1.0]]))


class TestHeldout:
    def test_empty_test_set(self, rng):
        seg = fit_models(rng.standard_normal(10), [], 1.0)
        with pytest.raises(ConfigError):
            heldout_loglik(seg, [])

    def test_single_segment_train_equals_test(self, rng):
        x = rng.standard_normal((40, 3))
        seg = fit_models(x, [], 1.0)
        test = [(t, x[t - 1]) for t in range(1, 41)]
        assert heldout_loglik(seg, test) == pytest.approx(train_loglik(x, seg), abs=1e-12)

    def test_order_invariance(self, rng):
        x = rng.standard_normal((50, 2))
        seg = fit_models(x, [13, 29], 1.0)
        test = [(t, rng.standard_normal(2)) for t in rng.integers(1, 51, size=25)]
        a = heldout_loglik(seg, test)
        b = heldout_loglik(seg, test[::-1])
        assert a == pytest.approx(b, abs=1e-12)
        ref = np.mean([dense_loglik(v, seg.model_at(t).mu, seg.model_at(t).sigma.sigma) for t, v in test])
        assert a == pytest.approx(ref, abs=1e-9)

    def test_true_k_beats_overfit(self):
        """Held-out fit at the true K against K=25 on 20 benchmark seeds."""
        wins = 0
        for seed in range(20):
            ds, _, _ = generate_synthetic(SyntheticSpec(seed=seed))
            x = ds.ts
            test_idx = make_folds(x.shape[0], 10, seed)[0]
            mask = np.ones(x.shape[0], bool)
            mask[test_idx - 1] = False
            positions = np.flatnonzero(mask) + 1
            tr = ggs(x[mask], 25, 10.0)
            test = [(t, x[t - 1]) for t in test_idx]
            score = {}
            for k in (9, 25):
                if k in tr.ks:
                    fitted = remap(fit_models(x[mask], tr.breakpoints(k), 10.0), positions, x.shape[0])
                    score[k] = heldout_loglik(fitted, test)
            wins += 25 not in score or score[9] > score[25]
        print(f"K=9 beat K=25 on {wins}/20 seeds")
        assert wins >= 18


class TestRemap:
    def test_identity_positions(self, rng):
        x = rng.standard_normal((20, 2))
        seg = fit_models(x, [8, 15], 1.0)
        again = remap(seg, np.arange(1, 21), 20)
        assert again.breakpoints == seg.breakpoints
        assert [s.start for s in again.segments] == [1, 8, 15]

    def test_gap_positions(self, rng):
        seg = fit_models(rng.standard_normal((5, 1)), [3], 1.0)
        # training rows 1..5 came from original 1, 2, 4, 7, 8
        mapped = remap(seg, np.array([1, 2, 4, 7, 8]), 9)
        assert mapped.breakpoints == (4,)
        assert mapped.segment_index(3) == 0
        assert mapped.segment_index(9) == 1


class TestCrossValidate:
    def test_two_folds_on_ten_points(self, rng):
        x = rng.standard_normal((10, 1))
        rep = cross_validate(x, 1, [1.0], folds=2, seed=3)
        assert sorted(sum(rep.fold_sets, [])) == list(range(1, 11))
        assert [len(f) for f in rep.fold_sets] == [5, 5]
        assert rep.chosen[0] == 1.0

    def test_deterministic(self, rng):
        x = np.vstack([rng.standard_normal((40, 2)), 3 * rng.standard_normal((40, 2))])
        a = cross_validate(x, 3, [0.1, 1.0], folds=4, seed=5)
        b = cross_validate(x, 3, [0.1, 1.0], folds=4, seed=5, threads=2)
        assert a.to_dict() == b.to_dict()

    def test_selection_rule(self, rng):
        x = np.vstack([rng.standard_normal((60, 2)), 5 * rng.standard_normal((60, 2))])
        rep = cross_validate(x, 4, [0.1, 10.0], folds=5, seed=1)
        complete = [a for a in rep.aggregates if a["n_folds"] == 5]
        best = max(a["test_mean"] for a in complete)
        lam, k = rep.chosen
        chosen = rep.aggregate(lam, k)
        assert chosen["test_mean"] >= best - 0.01 * abs(best)
        for a in complete:
            if a["test_mean"] >= best - 0.01 * abs(best):
                assert a["K"] >= k

    @pytest.mark.parametrize("kw", [dict(folds=1), dict(lambdas=[]), dict(lambdas=[-1.0]), dict(k_max=-1)])
    def test_bad_config(self, kw, rng):
        args = dict(k_max=2, lambdas=[1.0], folds=3)
        args.update(kw)
        with pytest.raises((ConfigError, ValueError)):
            cross_validate(rng.standard_normal((30, 1)), **args)

    @given(st.integers(4, 60), st.integers(2, 4), st.integers(0, 1000))
    def test_folds_partition(self, T, folds, seed):
        if T < 2 * folds:
            return
        parts = make_folds(T, folds, seed)
        joined = np.sort(np.concatenate(parts))
        np.testing.assert_array_equal(joined, np.arange(1, T + 1))
        assert max(map(len, parts)) - min(map(len, parts)) <= 1


@given(st.integers(0, 10_000))
def test_refit_is_idempotent(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((25, 2))
    b = sorted(rng.choice(np.arange(2, 26), size=2, replace=False))
    a, c = fit_models(x, b, 0.3), fit_models(x, b, 0.3)
    assert a.objective == c.objective
    for s, t in zip(a.segments, c.segments):
        np.testing.assert_array_equal(s.sigma.sigma, t.sigma.sigma)
