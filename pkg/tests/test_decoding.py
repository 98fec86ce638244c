"""Tests for greedy, beam, and exhaustive search plus the beam oracle."""

import math

import numpy as np
import pytest

from helpers import random_sentences, tiny_params

from ordernet.decoding import (
    EXHAUSTIVE_LIMIT,
    beam_decode,
    exhaustive_decode,
    greedy_decode,
    oracle_in_beam,
    rescore,
)
from ordernet.errors import IndexRangeError, InvalidOrderError
from ordernet.metrics import pm_scores
from ordernet.model import Order


# ---------------------------------------------------------------------------
# search equivalences
# ---------------------------------------------------------------------------


def test_beam_of_one_equals_greedy_everywhere():
    rng = np.random.default_rng(0)
    for trial in range(200):
        kind = ("cbow", "cnn", "lstm")[trial % 3]
        variable = bool(trial % 2)
        params = tiny_params(kind, seed=trial)
        sentences = random_sentences(rng, 12, int(rng.integers(2, 6)))
        greedy = greedy_decode(sentences, params, variable)
        best, beam = beam_decode(sentences, params, 1, variable)
        assert len(beam) == 1
        assert best.positions == greedy.positions
        assert best.stopped == greedy.stopped
        assert abs(best.log_prob - greedy.log_prob) <= 1e-12


def test_wide_beam_equals_exhaustive_search():
    # A beam holding every candidate sequence cannot prune, so its best
    # must match brute-force enumeration exactly.
    rng = np.random.default_rng(1)
    for trial in range(100):
        variable = bool(trial % 2)
        params = tiny_params("cbow", seed=1000 + trial)
        n = int(rng.integers(2, 5))
        sentences = random_sentences(rng, 12, n)
        width = sum(
            math.perm(n, k) for k in range(n + 1)) if variable else math.factorial(n)
        best, _ = beam_decode(sentences, params, width, variable)
        brute = exhaustive_decode(sentences, params, variable)
        assert best.positions == brute.positions
        assert abs(best.log_prob - brute.log_prob) <= 1e-10


def test_rescore_matches_every_search_score():
    rng = np.random.default_rng(2)
    for trial in range(30):
        variable = bool(trial % 2)
        params = tiny_params("lstm", seed=2000 + trial)
        sentences = random_sentences(rng, 12, int(rng.integers(2, 5)))
        greedy = greedy_decode(sentences, params, variable)
        assert abs(rescore(sentences, params, greedy, variable)
                   - greedy.log_prob) <= 1e-10
        best, beam = beam_decode(sentences, params, 4, variable)
        for order in beam:
            assert abs(rescore(sentences, params, order, variable)
                       - order.log_prob) <= 1e-10


# ---------------------------------------------------------------------------
# mode-specific output shapes
# ---------------------------------------------------------------------------


def test_fixed_length_outputs_are_full_permutations():
    rng = np.random.default_rng(3)
    for trial in range(20):
        params = tiny_params("cbow", seed=trial)
        n = int(rng.integers(2, 6))
        sentences = random_sentences(rng, 12, n)
        order = greedy_decode(sentences, params, variable_length=False)
        assert sorted(order.positions) == list(range(n))
        assert order.stopped is False


def test_variable_length_outputs_never_repeat_and_always_stop():
    rng = np.random.default_rng(4)
    full_length_seen = False
    for trial in range(60):
        params = tiny_params("cnn", seed=trial)
        n = int(rng.integers(2, 5))
        sentences = random_sentences(rng, 12, n)
        order = greedy_decode(sentences, params, variable_length=True)
        assert order.stopped is True
        assert len(set(order.positions)) == len(order.positions)
        assert len(order.positions) <= n
        if len(order.positions) == n:
            full_length_seen = True
            # The forced final stop contributes log(1) = 0, so re-scoring
            # the full sequence reproduces the search score exactly.
            assert abs(rescore(sentences, params, order, True)
                       - order.log_prob) <= 1e-12
    assert full_length_seen, "no trial exercised the forced-stop branch"


def test_uniform_logits_break_ties_toward_low_positions():
    # Zeroed attention readout makes every candidate equally likely; greedy
    # must then emit the identity order, and the stop slot loses its ties.
    rng = np.random.default_rng(5)
    params = tiny_params("cbow", seed=9)
    params.attn_v.value[...] = 0.0
    sentences = random_sentences(rng, 12, 4)
    fixed = greedy_decode(sentences, params, variable_length=False)
    assert fixed.positions == (0, 1, 2, 3)
    variable = greedy_decode(sentences, params, variable_length=True)
    assert variable.positions == (0, 1, 2, 3) and variable.stopped
    best, _ = beam_decode(sentences, params, 2, variable_length=False)
    assert best.positions == (0, 1, 2, 3)


def test_dominant_stop_key_stops_immediately():
    params = tiny_params("cbow", seed=3)
    h = params.hidden_dim
    params.attn_w.value[...] = 0.0
    params.attn_w.value[:h] = np.eye(h)          # keys pass through
    params.attn_v.value[...] = 1.0
    params.stop_key.value[...] = 100.0           # saturates its tanh block
    rng = np.random.default_rng(6)
    sentences = random_sentences(rng, 12, 4)
    order = greedy_decode(sentences, params, variable_length=True)
    assert order.positions == () and order.stopped
    best, _ = beam_decode(sentences, params, 130, variable_length=True)
    assert best.positions == ()


# ---------------------------------------------------------------------------
# beam structure
# ---------------------------------------------------------------------------


def test_beam_is_finished_sorted_and_within_width():
    rng = np.random.default_rng(7)
    for variable in (False, True):
        params = tiny_params("lstm", seed=11)
        sentences = random_sentences(rng, 12, 4)
        best, beam = beam_decode(sentences, params, 6, variable)
        assert best == beam[0]
        assert len(beam) <= 6
        scores = [o.log_prob for o in beam]
        assert scores == sorted(scores, reverse=True)
        for order in beam:
            assert len(set(order.positions)) == len(order.positions)
            if not variable:
                assert sorted(order.positions) == list(range(4))


def test_beam_size_must_be_positive():
    params = tiny_params("cbow", seed=0)
    sentences = random_sentences(np.random.default_rng(8), 12, 3)
    with pytest.raises(IndexRangeError):
        beam_decode(sentences, params, 0)


def test_exhaustive_guard_rejects_large_inputs():
    params = tiny_params("cbow", seed=0)
    sentences = random_sentences(np.random.default_rng(9), 12, EXHAUSTIVE_LIMIT + 1)
    with pytest.raises(IndexRangeError):
        exhaustive_decode(sentences, params)


def test_rescore_requires_stopped_orders_in_variable_mode():
    params = tiny_params("cbow", seed=0)
    sentences = random_sentences(np.random.default_rng(10), 12, 3)
    order = Order((0, 1), stopped=False, log_prob=-1.0)
    with pytest.raises(InvalidOrderError):
        rescore(sentences, params, order, variable_length=True)


# ---------------------------------------------------------------------------
# oracle over a finished beam
# ---------------------------------------------------------------------------


def _order(positions, log_prob):
    return Order(tuple(positions), True, log_prob)


def test_oracle_pmr_detects_gold_membership():
    beam = [_order([0, 1, 2], -1.0), _order([2, 1, 0], -2.0)]
    cand, score = oracle_in_beam(beam, (2, 1, 0), "pmr")
    assert score == 1.0 and cand.positions == (2, 1, 0)
    cand, score = oracle_in_beam(beam, (1, 0, 2), "pmr")
    assert score == 0.0


def test_oracle_pm_f_maximizes_the_pairwise_metric():
    gold = (0, 1, 2, 3)
    beam = [_order([3, 2, 1, 0], -0.5), _order([0, 1, 3, 2], -3.0)]
    cand, score = oracle_in_beam(beam, gold, "pm_f")
    assert cand.positions == (0, 1, 3, 2)
    assert score == pytest.approx(pm_scores((0, 1, 3, 2), gold).f)


def test_oracle_breaks_metric_ties_by_log_prob_then_lexicographically():
    gold = (0, 1, 2)
    # Hand-checked: both candidates share a longest common subsequence of
    # length 2 with gold, so pm_f ties and the higher log-probability
    # candidate must win.
    beam = [_order([0, 2, 1], -5.0), _order([1, 0, 2], -1.0)]
    assert pm_scores((0, 2, 1), gold).f == pm_scores((1, 0, 2), gold).f
    cand, _ = oracle_in_beam(beam, gold, "pm_f")
    assert cand.positions == (1, 0, 2)

    twins = [_order([1, 0, 2], -1.0), _order([0, 2, 1], -1.0)]
    cand, _ = oracle_in_beam(twins, gold, "pm_f")
    assert cand.positions == (0, 2, 1)


def test_oracle_rejects_bad_inputs():
    beam = [_order([0, 1], -1.0)]
    with pytest.raises(IndexRangeError):
        oracle_in_beam(beam, (0, 1), "kendall")
    with pytest.raises(InvalidOrderError):
        oracle_in_beam([], (0, 1), "pmr")


def test_oracle_score_never_decreases_with_beam_width():
    rng = np.random.default_rng(11)
    params = tiny_params("cbow", seed=21)
    sentences = random_sentences(rng, 12, 4)
    gold = tuple(rng.permutation(4))
    prev = -1.0
    for width in (1, 2, 4, 8, 16, 32):
        _, beam = beam_decode(sentences, params, width, variable_length=False)
        _, score = oracle_in_beam(beam, gold, "pm_f")
        assert score >= prev - 1e-12
        prev = score
