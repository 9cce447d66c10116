"""
Tests for Prokhorov, bounded-Lipschitz and Kolmogorov-Smirnov distances.
"""

import math
from itertools import permutations

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from mdshadow.distribution_metrics import (
    DistanceMatrix,
    EmpiricalSample,
    MetricResult,
    bl_distance_empirical,
    expectation_gap_bound,
    ks_distance,
    ks_threshold,
    ks_two_sample,
    pairwise_distances,
    prokhorov_empirical,
)
from mdshadow.errors import EdgeMismatchError, MetricCompatibilityError, NonFiniteDistanceError, SampleSizeError
from mdshadow.trajectory_observables import BinSpec, PathPL, histogram


def _prokhorov(a, b):
    return prokhorov_empirical(pairwise_distances(EmpiricalSample.from_features(a), EmpiricalSample.from_features(b)))


def _bl(a, b):
    return bl_distance_empirical(
        DistanceMatrix(cdist(a, b)),
        d_aa=cdist(a, a),
        d_bb=cdist(b, b),
    )


def _brute_force_prokhorov(d):
    n = d.shape[0]
    candidates = np.unique(np.concatenate([d.ravel(), np.arange(n + 1) / n]))
    candidates = candidates[candidates <= 1.0]
    coupled = np.array([d[np.arange(n), list(perm)] for perm in permutations(range(n))])
    for eps in candidates:
        exceed = np.sum(coupled > eps, axis=1)
        if np.any(exceed <= math.floor(n * eps + 1e-9)):
            return eps
    return 1.0


class TestPairwiseDistances:
    def test_single_point_to_itself(self):
        sample = EmpiricalSample.from_features([[1.0, 2.0]])
        np.testing.assert_array_equal(pairwise_distances(sample, sample).d, [[0.0]])

    def test_points_on_a_line(self):
        a = EmpiricalSample.from_features([0.0])
        b = EmpiricalSample.from_features([3.0])
        np.testing.assert_array_equal(pairwise_distances(a, b).d, [[3.0]])

    def test_path_sample_is_symmetric(self, rng):
        paths = [PathPL(0.0, 0.1, rng.standard_normal((6, 2))) for _ in range(5)]
        sample = EmpiricalSample.from_paths(paths)
        d = pairwise_distances(sample, sample).d
        np.testing.assert_array_equal(d, d.T)
        np.testing.assert_array_equal(np.diag(d), 0.0)

    def test_paths_on_nested_grids(self):
        coarse = EmpiricalSample.from_paths([PathPL(0.0, 0.2, np.zeros((2, 2)))])
        fine = EmpiricalSample.from_paths([PathPL(0.0, 0.1, np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]))])
        np.testing.assert_allclose(pairwise_distances(coarse, fine).d, [[1.0]])

    def test_metric_mismatch(self):
        features = EmpiricalSample.from_features([0.0])
        paths = EmpiricalSample.from_paths([PathPL(0.0, 0.1, np.zeros((2, 2)))])
        with pytest.raises(MetricCompatibilityError):
            pairwise_distances(features, paths)

    def test_non_finite_features(self):
        with pytest.raises(NonFiniteDistanceError):
            EmpiricalSample.from_features([np.inf])

    def test_distance_matrix_rejects_negative(self):
        with pytest.raises(ValueError):
            DistanceMatrix(np.array([[-1.0]]))


class TestProkhorov:
    def test_identical_samples(self, rng):
        points = rng.standard_normal((8, 2))
        result = _prokhorov(points, points)
        assert result.value == 0.0
        assert result.unmatched == []
        assert len(result.matching_pairs) == 8

    def test_single_point_pair(self):
        assert _prokhorov([[0.0]], [[0.3]]).value == pytest.approx(0.3)

    def test_one_point_must_move(self):
        result = _prokhorov([[0.0], [0.0]], [[0.0], [1.0]])
        assert result.value == 0.5
        assert len(result.unmatched) == 1

    def test_far_apart_samples_reach_one(self):
        assert _prokhorov([[0.0], [0.1]], [[50.0], [60.0]]).value == 1.0

    def test_matches_brute_force(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 7))
            a = rng.uniform(0, 1.5, size=(n, 2))
            b = rng.uniform(0, 1.5, size=(n, 2))
            d = cdist(a, b)
            assert prokhorov_empirical(DistanceMatrix(d)).value == _brute_force_prokhorov(d)

    def test_metric_axioms(self, rng):
        for _ in range(30):
            a, b, c = (rng.uniform(0, 2, size=(6, 2)) for _ in range(3))
            ab, bc, ac = _prokhorov(a, b).value, _prokhorov(b, c).value, _prokhorov(a, c).value
            assert ab == _prokhorov(b, a).value
            assert ac <= ab + bc + 1e-12
            assert 0.0 <= ab <= 1.0

    def test_translation_invariant(self, rng):
        a = rng.uniform(0, 1, size=(10, 2))
        b = rng.uniform(0, 1, size=(10, 2))
        shift = np.array([3.0, -2.0])
        assert _prokhorov(a + shift, b + shift).value == pytest.approx(_prokhorov(a, b).value, abs=1e-12)

    def test_unequal_sizes(self):
        with pytest.raises(SampleSizeError):
            prokhorov_empirical(DistanceMatrix(np.ones((2, 3))))

    def test_certificate_is_consistent(self, rng):
        a = rng.uniform(0, 1, size=(12, 2))
        b = rng.uniform(0, 1, size=(12, 2))
        d = cdist(a, b)
        result = prokhorov_empirical(DistanceMatrix(d))
        assert all(d[i, j] <= result.value for i, j in result.matching_pairs)
        assert len(result.unmatched) <= math.floor(12 * result.value + 1e-9)

    def test_to_dict(self):
        record = _prokhorov([[0.0], [0.0]], [[0.0], [1.0]]).to_dict()
        assert set(record) == {"metric", "value", "epsilon", "matching_pairs", "unmatched"}
        assert record["value"] == record["epsilon"] == 0.5


class TestBoundedLipschitz:
    def test_two_unit_masses_at_distance_two(self):
        assert bl_distance_empirical(DistanceMatrix([[2.0]])).value == pytest.approx(1.0, abs=1e-7)

    def test_two_unit_masses_at_distance_one(self):
        result = bl_distance_empirical(DistanceMatrix([[1.0]]))
        assert result.value == pytest.approx(2.0 / 3.0, abs=1e-7)
        assert result.test_function.shape == (2,)

    def test_identical_samples(self, rng):
        points = rng.standard_normal((6, 2))
        assert _bl(points, points).value == pytest.approx(0.0, abs=1e-8)

    def test_unequal_sizes_allowed(self):
        result = bl_distance_empirical(DistanceMatrix([[0.5, 1.0]]), d_aa=[[0.0]], d_bb=[[0.0, 0.5], [0.5, 0.0]])
        assert result.value > 0
        assert not result.lower_bound

    def test_missing_within_distances_flagged(self):
        assert bl_distance_empirical(DistanceMatrix([[1.0]])).lower_bound

    def test_sandwich_with_prokhorov(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 7))
            a = rng.uniform(0, 1.5, size=(n, 2))
            b = rng.uniform(0, 1.5, size=(n, 2))
            beta = _bl(a, b).value
            rho = _prokhorov(a, b).value
            # the BL value comes from HiGHS, whose primal and dual feasibility tolerance is 1e-7
            assert beta <= 2 * rho + 1e-7
            assert rho <= math.sqrt(1.5 * beta) + 1e-6

    def test_to_dict_includes_certificate(self):
        record = bl_distance_empirical(DistanceMatrix([[2.0]])).to_dict()
        assert len(record["test_function"]) == 2
        assert record["lower_bound"] is True


class TestKolmogorovSmirnov:
    def test_identical(self):
        hist = histogram([0.1, 0.4, 0.8], BinSpec(0.0, 1.0, 10))
        assert ks_distance(hist, hist) == 0.0

    def test_disjoint_supports(self):
        bins = BinSpec(0.0, 1.0, 10)
        assert ks_distance(histogram([0.05, 0.1], bins), histogram([0.9, 0.95], bins)) == 1.0

    def test_shifted_uniform(self):
        bins = BinSpec(0.0, 2.0, 20)
        a = histogram(np.linspace(0.0, 1.0, 100, endpoint=False), bins)
        b = histogram(np.linspace(0.5, 1.5, 100, endpoint=False), bins)
        cdf_a = np.cumsum(a.counts) / 100
        cdf_b = np.cumsum(b.counts) / 100
        assert ks_distance(a, b) == pytest.approx(np.max(np.abs(cdf_a - cdf_b)))
        assert ks_distance(a, b) == pytest.approx(0.5, abs=0.02)

    def test_overflow_counts(self):
        bins = BinSpec(0.0, 1.0, 4)
        assert ks_distance(histogram([-5.0], bins), histogram([5.0], bins)) == 1.0

    def test_edge_mismatch(self):
        with pytest.raises(EdgeMismatchError):
            ks_distance(histogram([0.5], BinSpec(0.0, 1.0, 4)), histogram([0.5], BinSpec(0.0, 1.0, 5)))

    def test_threshold(self):
        assert ks_threshold(200, 200) == pytest.approx(0.1358, abs=1e-4)

    def test_two_sample_on_raw_values(self, rng):
        values = rng.standard_normal(100)
        statistic, pvalue = ks_two_sample(values, np.append(values, np.nan))
        assert statistic == 0.0
        assert pvalue == pytest.approx(1.0)


def test_expectation_gap_bound():
    assert expectation_gap_bound(0.1, 2.0) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        expectation_gap_bound(-0.1, 1.0)


def test_metric_result_defaults():
    assert MetricResult("prokhorov", 0.0).to_dict()["matching_pairs"] == []
