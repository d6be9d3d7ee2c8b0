import numpy as np
import pytest

from geofv.mesh import Field, build_cartesian
from geofv.geostat.covariance import CovarianceError
from geofv.geostat.truncation import (TruncationRule, bitruncate,
                                      facies_proportion, truncate)


def test_single_truncation_bins():
    rule = TruncationRule([-1.0, 1.0], [10.0, 20.0, 30.0])
    z = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    out = truncate(z, rule)
    # bin convention: t_{i-1} < z <= t_i
    assert np.allclose(out, [10.0, 10.0, 20.0, 20.0, 30.0])


def test_percentile_thresholds():
    rule = TruncationRule([0.5], [0.0, 1.0], percentile=True)
    assert rule.raw_thresholds(1) == pytest.approx([0.0], abs=1e-12)
    rule2 = TruncationRule([0.975], [0.0, 1.0], percentile=True)
    assert rule2.raw_thresholds(1)[0] == pytest.approx(1.959964, rel=1e-5)
    # marginal_std rescales percentile thresholds
    assert rule2.raw_thresholds(1, marginal_std=2.0)[0] == pytest.approx(
        2 * 1.959964, rel=1e-5)


def test_field_in_field_out():
    mesh = build_cartesian(4, 4, 1, (1.0, 1.0, 1.0))
    z = Field(mesh, np.linspace(-2, 2, 16))
    rule = TruncationRule([0.0], [1.0, 2.0])
    out = truncate(z, rule)
    assert isinstance(out, Field)
    assert set(np.unique(out.values)) == {1.0, 2.0}


def test_bitruncate_table_lookup():
    rule = TruncationRule([-1.0, 1.0], [[1, 2], [3, 4], [5, 6]],
                          thresholds2=[0.0])
    z1 = np.array([-2.0, 0.0, 2.0, 0.0])
    z2 = np.array([-1.0, -1.0, 1.0, 1.0])
    assert np.allclose(bitruncate(z1, z2, rule), [1, 3, 6, 4])


def test_merged_facies():
    rule = TruncationRule([0.0], [[7, 7], [7, 9]], thresholds2=[0.0])
    z1 = np.array([-1.0, 1.0, 1.0])
    z2 = np.array([5.0, -1.0, 1.0])
    assert np.allclose(bitruncate(z1, z2, rule), [7, 7, 9])


def test_facies_proportions_sum_to_one():
    rule = TruncationRule([-1.0, 1.0], [[1, 2], [3, 4], [5, 6]],
                          thresholds2=[0.0])
    total = sum(facies_proportion(rule, i, j)
                for i in range(3) for j in range(2))
    assert total == pytest.approx(1.0, rel=1e-12)
    # product formula: p_ij = [G(t_i) - G(t_{i-1})] [G(s_j) - G(s_{j-1})]
    from scipy.special import ndtr
    p = facies_proportion(rule, 1, 0)
    assert p == pytest.approx((ndtr(1.0) - ndtr(-1.0)) * ndtr(0.0), rel=1e-12)


def test_wrong_rule_kind():
    uni = TruncationRule([0.0], [1.0, 2.0])
    bi = TruncationRule([0.0], [[1, 2], [3, 4]], thresholds2=[0.0])
    with pytest.raises(CovarianceError):
        bitruncate(np.zeros(3), np.zeros(3), uni)
    with pytest.raises(CovarianceError):
        truncate(np.zeros(3), bi)


def test_validation():
    with pytest.raises(CovarianceError):
        TruncationRule([1.0, 0.0], [1, 2, 3])  # not ascending
    with pytest.raises(CovarianceError):
        TruncationRule([0.0], [1.0])  # wrong length
    with pytest.raises(CovarianceError):
        TruncationRule([0.5, 1.5], [1, 2, 3], percentile=True)
    with pytest.raises(CovarianceError):
        TruncationRule([0.0], [[1, 2], [3, 4], [5, 6]], thresholds2=[0.0])
    with pytest.raises(CovarianceError):
        bitruncate(np.zeros(3), np.zeros(4),
                   TruncationRule([0.0], [[1, 2], [3, 4]], thresholds2=[0.0]))
    with pytest.raises(CovarianceError):
        facies_proportion(TruncationRule([0.0], [1.0, 2.0]), 5)
