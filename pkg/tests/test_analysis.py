"""Unit tests for the bound evaluation and the evaluation metrics."""

import numpy as np
import pytest

from mergeopt.analysis import (
    BoundInputs,
    bound_decomposition,
    convergence_bound,
    dominates,
    estimate_gradient_bound,
    front_mean_rewards,
    gap_series,
    icv_guarded_count,
    icv_score,
    pareto_front,
)
from mergeopt.core import RunConfig
from mergeopt.objectives import make_quadratic_set
from mergeopt.optimizers import run_iterative_rs


def _inputs(**overrides):
    base = dict(
        mu=1.0, l_smooth=8.0, grad_bound=3.0, merge_frequency=4,
        subset_size=2, num_objectives=3, delta_star=0.4, dist_ref_sq=1.5,
    )
    base.update(overrides)
    return BoundInputs(**base)


class TestBound:
    def test_gamma(self):
        assert _inputs().gamma == 63.0
        assert _inputs(l_smooth=1.0, merge_frequency=100).gamma == 99.0

    def test_sampling_factor_vanishes_at_full_subset(self):
        assert _inputs(subset_size=3).sampling_factor == 0.0
        assert _inputs(num_objectives=1, subset_size=1, merge_frequency=1).sampling_factor == 0.0

    def test_sampling_factor_value(self):
        bi = _inputs(num_objectives=6, subset_size=2, merge_frequency=4)
        assert bi.sampling_factor == pytest.approx((4 / 5) * 16 / 2)

    def test_terms_sum_to_bound(self):
        bi = _inputs()
        for t in (1, 10, 100, 10_000):
            hetero, drift = bound_decomposition(bi, t)
            assert hetero + drift == pytest.approx(convergence_bound(bi, t), abs=1e-15)

    def test_strictly_decreasing_in_steps(self):
        bi = _inputs()
        values = [convergence_bound(bi, t) for t in range(1, 101)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_zero_constants_give_zero_bound(self):
        bi = _inputs(grad_bound=0.0, delta_star=0.0, dist_ref_sq=0.0,
                     merge_frequency=1, subset_size=3)
        assert convergence_bound(bi, 50) == 0.0

    def test_rejects_invalid_constants(self):
        with pytest.raises(ValueError):
            _inputs(mu=0.0)
        with pytest.raises(ValueError):
            _inputs(subset_size=5)
        with pytest.raises(ValueError):
            _inputs(delta_star=-0.1)


class TestTrajectoryAnalysis:
    def _run(self):
        oset = make_quadratic_set(0, 3, 10, 1.0, 8.0, 1.0)
        cfg = RunConfig(merge_frequency=4, total_steps=100, weights=(1 / 3, 1 / 3, 1 / 3))
        return oset, run_iterative_rs(oset, cfg)

    def test_gap_series_at_sync_steps_only(self):
        oset, traj = self._run()
        series = gap_series(traj, oset)
        assert [t for t, _ in series] == list(range(4, 101, 4))
        assert all(gap >= -1e-12 for _, gap in series)

    def test_gradient_bound_covers_reference_point(self):
        oset, traj = self._run()
        bound = estimate_gradient_bound(traj, oset)
        ref_norms = [np.linalg.norm(o.grad(traj.theta_ref)) for o in oset.objectives]
        assert bound >= max(ref_norms) - 1e-12


class TestIcv:
    def test_fixture(self):
        assert icv_score([[1.0, 2.0, 3.0]]) == pytest.approx(2.449489742783178, abs=1e-12)

    def test_averages_over_samples(self):
        single = icv_score([[1.0, 2.0, 3.0]])
        assert icv_score([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]) == pytest.approx(single)

    def test_epsilon_guard_counts(self):
        rewards = [[1.0, 1.0, 1.0], [1.0, 2.0, 3.0]]
        assert icv_guarded_count(rewards) == 1
        assert np.isfinite(icv_score(rewards))

    def test_rejects_single_objective(self):
        with pytest.raises(ValueError):
            icv_score([[1.0]])

    def test_rejects_nonpositive_epsilon(self):
        with pytest.raises(ValueError):
            icv_score([[1.0, 2.0]], epsilon=0.0)


class TestPareto:
    def test_dominance_semantics(self):
        assert dominates((2, 2), (1, 1))
        assert dominates((2, 1), (1, 1))
        assert not dominates((1, 1), (1, 1))
        assert not dominates((2, 0), (1, 1))

    def test_fixture_front(self):
        points = [(1, 1), (2, 0.5), (0.5, 2), (0.9, 0.9)]
        assert sorted(pareto_front(points)) == [0, 1, 2]

    def test_duplicates_all_retained(self):
        points = [(1, 1), (1, 1), (0.5, 0.5)]
        assert sorted(pareto_front(points)) == [0, 1]

    def test_single_point(self):
        assert pareto_front([(3.0, 4.0)]) == [0]

    def test_front_means(self):
        points = np.array([(1.0, 1.0), (2.0, 0.5), (0.5, 2.0), (0.9, 0.9)])
        per_objective, overall = front_mean_rewards(points, [0, 1, 2])
        assert np.allclose(per_objective, [3.5 / 3, 3.5 / 3])
        assert overall == pytest.approx(3.5 / 3)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            pareto_front([(1.0, np.nan)])
