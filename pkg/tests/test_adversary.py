"""Jamming strategies, admissibility clipping, and side-information feeds."""

import math

import numpy as np
import pytest

from avcsim.alphabet import mutual_information, variational_distance
from avcsim.avc import admissible, state_cost
from avcsim.jammer import (
    ChannelCsiStream,
    CsiReport,
    JammerStrategy,
    _snap_to_grid,
    chunk_cost_grid,
    jam,
    make_channel_csi,
    make_cost_csi,
    true_chunk_channel,
    worst_case_dependent_strategy,
)

UNIFORM2 = np.array([0.5, 0.5])


def test_strategy_validation():
    with pytest.raises(ValueError):
        JammerStrategy(kind="adaptive")
    with pytest.raises(ValueError):
        JammerStrategy(kind="fixed_sequence")
    with pytest.raises(ValueError):
        JammerStrategy(kind="iid_mixture")
    with pytest.raises(ValueError):
        JammerStrategy(kind="memoryless_dependent")


def test_input_aware_flag():
    assert not JammerStrategy(kind="iid_mixture", mixture=(1.0, 0.0)).input_aware
    assert JammerStrategy(
        kind="memoryless_dependent", kernel=((1.0, 0.0), (1.0, 0.0))).input_aware
    assert JammerStrategy(kind="greedy_dependent").input_aware


def test_fixed_sequence_replay(bitflip):
    seq = (0, 1, 0, 0)
    strat = JammerStrategy(kind="fixed_sequence", sequence=seq)
    s = jam(bitflip, strat, None, 4, 0.25, seed=0)
    assert s.tolist() == list(seq)


def test_fixed_sequence_validation(bitflip):
    strat = JammerStrategy(kind="fixed_sequence", sequence=(0, 1, 0, 0))
    with pytest.raises(ValueError):
        jam(bitflip, strat, None, 5, 0.25, seed=0)
    with pytest.raises(ValueError):
        jam(bitflip, strat, None, 4, 0.1, seed=0)
    bad = JammerStrategy(kind="fixed_sequence", sequence=(0, 2, 0, 0))
    with pytest.raises(ValueError):
        jam(bitflip, bad, None, 4, 1.0, seed=0)


def test_iid_clip_from_end_is_exact(bitflip):
    strat = JammerStrategy(kind="iid_mixture", mixture=(0.0, 1.0))
    s = jam(bitflip, strat, None, 8, 0.25, seed=5)
    assert s.tolist() == [1, 1, 0, 0, 0, 0, 0, 0]


def test_iid_always_admissible(bitflip):
    strat = JammerStrategy(kind="iid_mixture", mixture=(0.5, 0.5))
    for seed in range(20):
        s = jam(bitflip, strat, None, 16, 0.3, seed=seed)
        assert admissible(bitflip, s, 0.3)


def test_negative_budget_rejected(bitflip):
    strat = JammerStrategy(kind="iid_mixture", mixture=(1.0, 0.0))
    with pytest.raises(ValueError):
        jam(bitflip, strat, None, 8, -0.1, seed=0)


def test_memoryless_copies_input(bitflip):
    strat = JammerStrategy(
        kind="memoryless_dependent", kernel=((1.0, 0.0), (0.0, 1.0)))
    x = np.array([0, 1, 1, 0, 1, 0, 0, 1])
    s = jam(bitflip, strat, x, 8, 1.0, seed=3)
    assert np.array_equal(s, x)


def test_memoryless_needs_input(bitflip):
    strat = JammerStrategy(
        kind="memoryless_dependent", kernel=((1.0, 0.0), (0.0, 1.0)))
    with pytest.raises(ValueError):
        jam(bitflip, strat, None, 8, 1.0, seed=3)
    bad = JammerStrategy(kind="memoryless_dependent", kernel=((1.0, 0.0),))
    with pytest.raises(ValueError):
        jam(bitflip, bad, np.zeros(8, dtype=int), 8, 1.0, seed=3)


def test_memoryless_clipped_to_budget(bitflip):
    strat = JammerStrategy(
        kind="memoryless_dependent", kernel=((0.0, 1.0), (0.0, 1.0)))
    x = np.zeros(8, dtype=int)
    s = jam(bitflip, strat, x, 8, 0.5, seed=3)
    assert s.tolist() == [1, 1, 1, 1, 0, 0, 0, 0]


def test_greedy_admissible_and_deterministic(bitflip):
    strat = JammerStrategy(kind="greedy_dependent")
    x = np.array([0, 1] * 8)
    a = jam(bitflip, strat, x, 16, 0.2, seed=11, P=UNIFORM2)
    b = jam(bitflip, strat, x, 16, 0.2, seed=11, P=UNIFORM2)
    assert np.array_equal(a, b)
    assert admissible(bitflip, a, 0.2)


def test_worst_case_dependent_strategy(bitflip):
    strat = worst_case_dependent_strategy(bitflip, UNIFORM2, 0.1)
    assert strat.kind == "memoryless_dependent"
    kernel = np.asarray(strat.kernel)
    assert kernel.shape == (2, 2)
    assert np.allclose(kernel.sum(axis=1), 1.0, atol=1e-9)
    # the bitflip minimizer flips each input with probability Lambda
    assert np.allclose(kernel[:, 1], 0.1, atol=5e-3)


def test_chunk_cost_grid(bitflip):
    grid = chunk_cost_grid(bitflip, 4)
    assert grid.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert chunk_cost_grid(bitflip, 4) is grid


def test_snap_to_grid_ties_up():
    grid = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    assert _snap_to_grid(0.3, grid) == 0.25
    assert _snap_to_grid(0.375, grid) == 0.5
    assert _snap_to_grid(0.374, grid) == 0.25
    assert _snap_to_grid(-0.1, grid) == 0.0
    assert _snap_to_grid(1.2, grid) == 1.0


def test_cost_csi_exact_when_noiseless(bitflip):
    s = np.array([1, 1, 0, 0, 0, 1, 0, 1])
    report = make_cost_csi(bitflip, s, 4, 0.0, noise_seed=2)
    assert report.kind == "cost"
    assert report.cost_estimates == (0.5, 0.5)
    assert report.num_chunks == 2


def test_cost_csi_never_undershoots(bitflip):
    rng = np.random.default_rng(8)
    for seed in range(30):
        s = rng.integers(0, 2, size=16)
        report = make_cost_csi(bitflip, s, 4, 0.25, noise_seed=seed)
        for m, est in enumerate(report.cost_estimates):
            true = state_cost(bitflip, s[m * 4:(m + 1) * 4]) / 4
            assert est >= true - 1e-12
            assert est <= true + 0.25 + 0.125 + 1e-12


def test_cost_csi_noise_hits_both_neighbors(bitflip):
    s = np.array([1, 1, 0, 0])
    seen = set()
    for seed in range(40):
        report = make_cost_csi(bitflip, s, 4, 0.25, noise_seed=seed)
        seen.add(report.cost_estimates[0])
    assert seen == {0.5, 0.75}


def test_cost_csi_length_mismatch(bitflip):
    with pytest.raises(ValueError):
        make_cost_csi(bitflip, np.array([1, 0, 0]), 2, 0.0, noise_seed=0)


def test_true_chunk_channel_mixture(bitflip):
    ch = true_chunk_channel(bitflip, [0, 1, 0, 1], [0, 0, 1, 1])
    assert np.allclose(ch.w, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)


def test_true_chunk_channel_absent_input_row(bitflip):
    ch = true_chunk_channel(bitflip, [0, 0, 0, 0], [0, 0, 1, 1])
    assert np.allclose(ch.w, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)


def test_true_chunk_channel_validation(bitflip):
    with pytest.raises(ValueError):
        true_chunk_channel(bitflip, [0, 1], [0])
    with pytest.raises(ValueError):
        true_chunk_channel(bitflip, [], [])


def test_channel_csi_stream_truth_first(bitflip):
    stream = ChannelCsiStream(bitflip, 4, UNIFORM2, 0.05, seed=3)
    rng = np.random.default_rng(0)
    for _ in range(12):
        x = rng.integers(0, 2, size=4)
        s = rng.integers(0, 2, size=4)
        members, mi_true = stream.next_chunk(x, s)
        truth = true_chunk_channel(bitflip, x, s)
        assert np.array_equal(members[0].w, truth.w)
        assert math.isclose(
            mi_true, mutual_information(UNIFORM2, truth.w), rel_tol=1e-12)
        # every decoy stays within epsilon below the truth
        for V in members[1:]:
            assert mutual_information(UNIFORM2, V.w) >= mi_true - 0.05 - 1e-9


def test_channel_csi_stream_respects_cap(bitflip):
    stream = ChannelCsiStream(bitflip, 4, UNIFORM2, 0.5, seed=3, max_set=3)
    rng = np.random.default_rng(1)
    for _ in range(8):
        x = rng.integers(0, 2, size=4)
        s = rng.integers(0, 2, size=4)
        members, _ = stream.next_chunk(x, s)
        assert 1 <= len(members) <= 3
    with pytest.raises(ValueError):
        ChannelCsiStream(bitflip, 4, UNIFORM2, 0.05, seed=3, max_set=0)


def test_channel_csi_cost_cap_zero_leaves_truth_alone(bitflip):
    stream = ChannelCsiStream(bitflip, 4, UNIFORM2, 0.5, seed=3, cost_cap=0.0)
    members, _ = stream.next_chunk(np.array([0, 1, 0, 1]), np.zeros(4, dtype=int))
    assert len(members) == 1


def test_make_channel_csi_matches_stream(bitflip):
    rng = np.random.default_rng(9)
    x = rng.integers(0, 2, size=12)
    s = rng.integers(0, 2, size=12)
    report = make_channel_csi(bitflip, x, s, 4, UNIFORM2, 0.05, seed=21)
    assert report.kind == "channels"
    assert report.num_chunks == 3
    stream = ChannelCsiStream(bitflip, 4, UNIFORM2, 0.05, seed=21)
    for m in range(3):
        members, _ = stream.next_chunk(x[m * 4:(m + 1) * 4], s[m * 4:(m + 1) * 4])
        got = report.channel_sets[m]
        assert len(got) == len(members)
        for a, b in zip(got, members):
            assert np.array_equal(a.w, b.w)


def test_make_channel_csi_validation(bitflip):
    with pytest.raises(ValueError):
        make_channel_csi(bitflip, np.zeros(5, dtype=int), np.zeros(5, dtype=int),
                         4, UNIFORM2, 0.05, seed=21)
    with pytest.raises(ValueError):
        make_channel_csi(bitflip, np.zeros(8, dtype=int), np.zeros(4, dtype=int),
                         4, UNIFORM2, 0.05, seed=21)


def test_csi_report_validation():
    with pytest.raises(ValueError):
        CsiReport(kind="oracle", epsilon=0.0)
    with pytest.raises(ValueError):
        CsiReport(kind="cost", epsilon=0.0)
    with pytest.raises(ValueError):
        CsiReport(kind="channels", epsilon=0.0)
    report = CsiReport(kind="cost", epsilon=0.0, cost_estimates=(0.0, 0.5))
    assert report.num_chunks == 2
