"""Unit tests for weight validation, merge kernels and config checking."""

import numpy as np
import pytest

from mergeopt.core import (
    ConfigError,
    RunConfig,
    SubsetSelection,
    check_params,
    check_weights,
    convex_combine,
    normalize_subset_weights,
    validate_run_config,
)


class TestCheckParams:
    def test_accepts_list(self):
        arr = check_params([1.0, 2.0, 3.0])
        assert arr.dtype == np.float64
        assert arr.shape == (3,)

    @pytest.mark.parametrize("bad", [[], [[1.0, 2.0]], [1.0, np.nan], [np.inf]])
    def test_rejects_bad_input(self, bad):
        with pytest.raises(ValueError):
            check_params(bad)


class TestCheckWeights:
    def test_accepts_simplex(self):
        w = check_weights((0.5, 0.25, 0.25))
        assert np.isclose(w.sum(), 1.0)

    def test_rejects_rather_than_renormalizes(self):
        with pytest.raises(ValueError, match="sum to 1"):
            check_weights((0.5, 0.25, 0.24))

    def test_rejects_zero_and_negative(self):
        with pytest.raises(ValueError, match="strictly positive"):
            check_weights((1.0, 0.0))
        with pytest.raises(ValueError, match="strictly positive"):
            check_weights((1.5, -0.5))


class TestSubsetSelection:
    def test_indices_coerced_to_ints(self):
        subset = SubsetSelection((np.int64(2), np.int64(0)))
        assert subset.indices == (2, 0)
        assert len(subset) == 2

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError, match="distinct"):
            SubsetSelection((1, 1))

    def test_rejects_negative(self):
        with pytest.raises(ValueError, match="non-negative"):
            SubsetSelection((0, -1))


class TestNormalizeSubsetWeights:
    def test_uniform_pair(self):
        lam = normalize_subset_weights((1 / 3, 1 / 3, 1 / 3), SubsetSelection((0, 2)))
        assert np.allclose(lam, [0.5, 0.5], atol=1e-15)

    def test_non_uniform_pair(self):
        lam = normalize_subset_weights((0.5, 0.25, 0.25), SubsetSelection((0, 1)))
        assert np.allclose(lam, [2 / 3, 1 / 3], atol=1e-15)

    def test_full_subset_is_identity(self):
        lam = normalize_subset_weights((0.2, 0.3, 0.5), SubsetSelection((0, 1, 2)))
        assert np.array_equal(lam, [0.2, 0.3, 0.5])

    def test_empty_subset_rejected(self):
        with pytest.raises(ValueError, match="empty-subset"):
            normalize_subset_weights((0.5, 0.5), SubsetSelection(()))

    def test_out_of_range_index(self):
        with pytest.raises(ValueError, match="out of range"):
            normalize_subset_weights((0.5, 0.5), SubsetSelection((0, 5)))


class TestConvexCombine:
    def test_single_vector_is_identity(self):
        v = np.array([1.0, -2.0, 3.0])
        assert np.array_equal(convex_combine([v], [1.0]), v)

    def test_result_within_coordinate_hull(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            k = int(rng.integers(1, 6))
            vecs = [rng.normal(size=7) for _ in range(k)]
            lam = rng.random(k) + 0.1
            lam /= lam.sum()
            out = convex_combine(vecs, lam)
            stacked = np.stack(vecs)
            assert np.all(out <= stacked.max(axis=0) + 1e-12)
            assert np.all(out >= stacked.min(axis=0) - 1e-12)

    def test_deterministic_repeat(self):
        rng = np.random.default_rng(1)
        vecs = [rng.normal(size=9) for _ in range(4)]
        lam = np.full(4, 0.25)
        assert np.array_equal(convex_combine(vecs, lam), convex_combine(vecs, lam))

    def test_rejects_bad_lambdas(self):
        v = [np.ones(3), np.zeros(3)]
        with pytest.raises(ValueError):
            convex_combine(v, [0.7, 0.2])
        with pytest.raises(ValueError):
            convex_combine(v, [1.2, -0.2])

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            convex_combine([np.ones(3), np.ones(4)], [0.5, 0.5])


class TestValidateRunConfig:
    def test_valid_default_config(self):
        assert validate_run_config(RunConfig()) == []

    def test_collects_all_violations(self):
        cfg = RunConfig(subset_size=5, merge_frequency=300, total_steps=200)
        violations = validate_run_config(cfg)
        assert "M exceeds N" in violations
        assert "m exceeds T" in violations

    def test_weight_length_mismatch(self):
        cfg = RunConfig(weights=(0.5, 0.5))
        assert any("weights length" in v for v in validate_run_config(cfg))

    def test_constant_mode_needs_learning_rate(self):
        cfg = RunConfig(lr_mode="constant")
        assert any("learning_rate" in v for v in validate_run_config(cfg))

    def test_bad_candidate_reported(self):
        cfg = RunConfig(merge_strategy="selective", candidates=((0.5, 0.4, 0.2),))
        assert any("simplex" in v for v in validate_run_config(cfg))

    def test_config_error_carries_violations(self):
        exc = ConfigError(["a", "b"])
        assert exc.violations == ["a", "b"]
        assert "a; b" in str(exc)
