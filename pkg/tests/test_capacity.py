"""Saddle-point solvers against closed forms and grid searches."""

import math

import numpy as np
import pytest

from avcsim.alphabet import binary_entropy, mutual_information
from avcsim.avc import Avc, induced_channel_q
from avcsim.capacity import (
    CachedStdMin,
    capacity_dep,
    capacity_std,
    closed_form_bitflip,
    closed_form_realadder_dep,
    min_mi_dep,
    min_mi_std,
    min_mi_std_restricted,
)

UNIFORM2 = np.array([0.5, 0.5])

BITFLIP_GOLDEN = {
    0.0: 1.0,
    0.05: 0.7136030428840437,
    0.1: 0.5310044064107188,
    0.25: 0.18872187554086717,
    0.4: 0.02904940554533142,
    0.5: 0.0,
    0.75: 0.0,
}

ADDER_DEP_GOLDEN = {
    0.5: 0.12255624891826566,
    0.6: 0.07290559532005592,
    0.75: 0.025850761940059863,
    0.9: 0.003798320642631303,
    1.0: 0.0,
}


@pytest.mark.parametrize("lam,want", sorted(BITFLIP_GOLDEN.items()))
def test_closed_form_bitflip(lam, want):
    assert math.isclose(closed_form_bitflip(lam), want, rel_tol=1e-12, abs_tol=1e-15)


def test_closed_form_bitflip_domain():
    with pytest.raises(ValueError):
        closed_form_bitflip(-0.1)
    with pytest.raises(ValueError):
        closed_form_bitflip(1.1)


@pytest.mark.parametrize("lam,want", sorted(ADDER_DEP_GOLDEN.items()))
def test_closed_form_adder_dep(lam, want):
    got = closed_form_realadder_dep(lam)
    assert math.isclose(got, want, rel_tol=1e-12, abs_tol=1e-15)
    # independent rewrite of the same expression
    if 0.5 <= lam < 1.0:
        direct = binary_entropy((1.0 - lam) / 2.0) \
            - (1.0 + lam) / 2.0 * binary_entropy(2.0 * lam / (1.0 + lam))
        assert math.isclose(got, direct, rel_tol=1e-12)


def test_closed_form_adder_dep_domain():
    with pytest.raises(ValueError):
        closed_form_realadder_dep(1.5)


def test_min_mi_std_bitflip_quarter(bitflip):
    value, q = min_mi_std(bitflip, UNIFORM2, 0.25)
    assert math.isclose(value, BITFLIP_GOLDEN[0.25], rel_tol=1e-7)
    assert abs(q[1] - 0.25) < 1e-6


def test_min_mi_std_saturated_budget(bitflip):
    value, _ = min_mi_std(bitflip, UNIFORM2, 0.7)
    assert value < 1e-8


def test_min_mi_std_rejects_negative_budget(bitflip):
    with pytest.raises(ValueError):
        min_mi_std(bitflip, UNIFORM2, -0.01)


def test_min_mi_std_monotone_in_budget(bitflip):
    values = [min_mi_std(bitflip, UNIFORM2, lam)[0]
              for lam in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)]
    for lo, hi in zip(values[1:], values[:-1]):
        assert lo <= hi + 1e-9


def test_min_mi_std_grid_cross_check(bitflip):
    P = np.array([0.6, 0.4])
    lam = 0.3
    value, _ = min_mi_std(bitflip, P, lam)
    grid = np.linspace(0.0, lam, 2001)
    best = min(
        mutual_information(P, induced_channel_q(bitflip, np.array([1.0 - q, q])))
        for q in grid)
    assert value <= best + 1e-6
    assert value >= best - 1e-9


def test_min_mi_dep_below_std(bitflip):
    rng = np.random.default_rng(12)
    for _ in range(5):
        W = rng.dirichlet(np.ones(2), size=(2, 2))
        cost = rng.uniform(0.0, 1.0, 2)
        cost -= cost.min()
        avc = Avc(W, cost)
        for lam in (0.3 * avc.lambda_star, 0.8 * avc.lambda_star):
            v_std, _ = min_mi_std(avc, UNIFORM2, lam)
            v_dep, U = min_mi_dep(avc, UNIFORM2, lam)
            assert v_dep <= v_std + 1e-6
            assert U.shape == (2, 2)


def test_min_mi_dep_bitflip_matches_std(bitflip):
    v_dep, _ = min_mi_dep(bitflip, UNIFORM2, 0.25)
    assert math.isclose(v_dep, BITFLIP_GOLDEN[0.25], rel_tol=1e-6)


def test_min_mi_dep_size_mismatch(bitflip):
    with pytest.raises(ValueError):
        min_mi_dep(bitflip, np.array([0.5, 0.25, 0.25]), 0.25)


def test_restricted_min_infeasible_start(bitflip):
    value, q = min_mi_std_restricted(
        bitflip, UNIFORM2, 0.0, np.array([0.0, 1.0]), 0.1, 1e-6)
    assert value == math.inf
    assert q is None


def test_restricted_min_dominates_unrestricted(bitflip):
    base, _ = min_mi_std(bitflip, UNIFORM2, 0.25)
    value, q = min_mi_std_restricted(
        bitflip, UNIFORM2, 0.25, np.array([0.5, 0.5]), 0.5, 1e-6)
    assert value >= base - 1e-7
    assert q is not None


def test_capacity_std_bitflip_quarter(bitflip):
    res = capacity_std(bitflip, 0.25, tol=1e-5)
    assert abs(res.value - BITFLIP_GOLDEN[0.25]) < 2e-3
    assert abs(res.P_star[0] - 0.5) < 5e-3
    assert abs(res.minimizer[1] - 0.25) < 5e-3
    assert res.inner_gap >= 0.0


def test_capacity_dep_bitflip_quarter(bitflip):
    res = capacity_dep(bitflip, 0.25, tol=1e-5)
    assert abs(res.value - BITFLIP_GOLDEN[0.25]) < 2e-3


def test_cached_std_min_rounds_keys(bitflip):
    cache = CachedStdMin(bitflip, UNIFORM2)
    direct, _ = min_mi_std(bitflip, UNIFORM2, 0.1, tol=1e-8)
    assert math.isclose(cache.value(0.1), direct, rel_tol=1e-9)
    assert cache.value(0.1) == cache.value(0.1 + 1e-12)
    assert cache.value(-1e-13) == cache.value(0.0)
