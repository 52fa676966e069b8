"""Types, entropies, and combinatorial helpers."""

import itertools
import math

import numpy as np
import pytest

from avcsim.alphabet import (
    ChannelMatrix,
    EmpiricalType,
    InputDistribution,
    binary_entropy,
    empirical_mutual_information,
    entropy,
    iter_compositions,
    joint_type,
    log2_int,
    mutual_information,
    type_class_enumerate,
    type_class_sample,
    type_class_size,
    variational_distance,
)

H_QUARTER = 0.8112781244591328  # h(1/4) = 2 - (3/4) log2 3
BSC01_MI = 0.5310044064107188   # 1 - h(0.1)


def test_binary_entropy_endpoints_and_quarter():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == 1.0
    assert math.isclose(binary_entropy(0.25), H_QUARTER, rel_tol=1e-14)


@pytest.mark.parametrize("bad", [-0.001, 1.001, 2.0])
def test_binary_entropy_rejects_out_of_range(bad):
    with pytest.raises(ValueError):
        binary_entropy(bad)


def test_entropy_uniform_and_degenerate():
    assert entropy(np.ones(4) / 4) == 2.0
    assert entropy(np.array([1.0, 0.0])) == 0.0


def test_mutual_information_bsc():
    P = np.array([0.5, 0.5])
    V = np.array([[0.9, 0.1], [0.1, 0.9]])
    assert math.isclose(mutual_information(P, V), BSC01_MI, rel_tol=1e-13)


def test_mutual_information_accepts_wrappers():
    P = InputDistribution(np.array([0.5, 0.5]))
    V = ChannelMatrix(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert mutual_information(P, V) == 1.0


def test_mutual_information_independent_is_zero():
    P = np.array([0.3, 0.7])
    V = np.array([[0.6, 0.4], [0.6, 0.4]])
    assert mutual_information(P, V) >= 0.0
    assert mutual_information(P, V) < 1e-12


def test_mutual_information_shape_mismatch():
    with pytest.raises(ValueError):
        mutual_information(np.array([0.5, 0.5]), np.array([[1.0, 0.0]]))


def test_log2_int_small_values():
    assert log2_int(1) == 0.0
    assert log2_int(1 << 20) == 20.0


def test_log2_int_beyond_float_range():
    n = 3 << 1998
    expected = 1998.0 + math.log2(3.0)
    assert math.isclose(log2_int(n), expected, rel_tol=1e-12)
    with pytest.raises(ValueError):
        log2_int(0)


def test_variational_distance():
    assert variational_distance(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 1.0
    assert variational_distance(np.array([0.5, 0.5]), np.array([0.5, 0.5])) == 0.0
    assert math.isclose(
        variational_distance(np.array([0.6, 0.4]), np.array([0.5, 0.5])), 0.1,
        rel_tol=1e-12)
    with pytest.raises(ValueError):
        variational_distance(np.array([1.0]), np.array([0.5, 0.5]))


def test_input_distribution_validation():
    p = InputDistribution(np.array([0.25, 0.75]))
    assert abs(float(p.p.sum()) - 1.0) < 1e-15
    with pytest.raises(ValueError):
        InputDistribution(np.array([0.5, -0.5, 1.0]))
    with pytest.raises(ValueError):
        InputDistribution(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        InputDistribution(np.array([1.0]))


def test_input_distribution_renormalizes_within_tolerance():
    p = InputDistribution(np.array([0.5, 0.5 + 5e-13]))
    assert abs(float(p.p.sum()) - 1.0) < 1e-15


def test_channel_matrix_rejects_bad_rows():
    with pytest.raises(ValueError):
        ChannelMatrix(np.array([[0.5, 0.4], [0.5, 0.5]]))
    with pytest.raises(ValueError):
        ChannelMatrix(np.array([0.5, 0.5]))


def test_empirical_type_counts():
    t = EmpiricalType.from_sequence([0, 1, 1, 0, 1], 2)
    assert list(t.counts) == [2, 3]
    assert t.length == 5
    freq = t.frequencies()
    assert math.isclose(freq[1], 0.6, rel_tol=1e-15)


def test_empirical_type_errors():
    with pytest.raises(ValueError):
        EmpiricalType.from_sequence([0, 2], 2)
    empty = EmpiricalType.from_sequence([], 2)
    with pytest.raises(ValueError):
        empty.frequencies()


def test_joint_type_counts_and_marginals():
    jt = joint_type([0, 0, 1, 1], [0, 1, 0, 1], 2, 2)
    assert jt.counts.tolist() == [[1, 1], [1, 1]]
    assert jt.length == 4
    with pytest.raises(ValueError):
        joint_type([0, 1], [0], 2, 2)
    with pytest.raises(ValueError):
        joint_type([0, 3], [0, 1], 2, 2)


def test_empirical_mutual_information_identity():
    assert empirical_mutual_information(np.array([[2.0, 0.0], [0.0, 2.0]])) == 1.0


def test_empirical_mutual_information_frozen_value():
    # counts [[3,1],[1,3]] over 8 symbols: 1 - h(1/4)
    J = np.array([[3.0, 1.0], [1.0, 3.0]])
    assert math.isclose(
        empirical_mutual_information(J), 0.18872187554086717, rel_tol=1e-13)


def test_empirical_mutual_information_empty_raises():
    with pytest.raises(ValueError):
        empirical_mutual_information(np.zeros((2, 2)))


def test_type_class_size_multinomials():
    assert type_class_size([4, 4]) == math.comb(8, 4)
    assert type_class_size([2, 2]) == 6
    assert type_class_size([0, 3]) == 1
    assert type_class_size([2, 2, 4]) == math.factorial(8) // (2 * 2 * math.factorial(4))


def test_type_class_enumerate_lexicographic():
    seqs = [tuple(s) for s in type_class_enumerate([2, 1])]
    assert seqs == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]


def test_type_class_enumerate_matches_permutations():
    expected = sorted(set(itertools.permutations((0, 0, 1, 1))))
    got = [tuple(s) for s in type_class_enumerate([2, 2])]
    assert got == expected


def test_type_class_enumerate_guard():
    # 24! / (8!)^3 is about 9.5e9 sequences
    with pytest.raises(ValueError):
        type_class_enumerate([8, 8, 8])


def test_type_class_sample_is_deterministic_and_typed():
    rng = np.random.default_rng(3)
    a = type_class_sample([3, 2], rng)
    assert np.bincount(a, minlength=2).tolist() == [3, 2]
    b = type_class_sample([3, 2], np.random.default_rng(3))
    assert np.array_equal(a, b)


def test_iter_compositions():
    assert list(iter_compositions(3, 2)) == [(0, 3), (1, 2), (2, 1), (3, 0)]
    assert len(list(iter_compositions(4, 3))) == math.comb(6, 2)
    assert all(sum(c) == 4 for c in iter_compositions(4, 3))
    with pytest.raises(ValueError):
        list(iter_compositions(3, 0))
