"""Order search over a trained model: greedy, beam, exhaustive, oracle.

All searches share the same tie discipline: candidates sort by cumulative
log-probability, then lexicographically by their position sequence (with the
stop slot numbered n, so stopping loses ties to any position).  Scores are
raw sums of step log-probabilities; nothing is length-normalized.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .autodiff import Graph
from .errors import IndexRangeError, InvalidOrderError
from .metrics import lsr_scores, pm_scores
from .model import START, Order, advance_decoder, decode_step, encode_document, sequence_log_prob

EXHAUSTIVE_LIMIT = 8  # factorial guard


def _prepare(sentences, params):
    graph = Graph(recording=False)
    encoded = encode_document(graph, sentences, params)
    return graph, encoded


def greedy_decode(sentences, params, variable_length=False):
    """Follow the argmax at every step; ties go to the lowest slot index."""
    n = len(sentences)
    graph, encoded = _prepare(sentences, params)
    state = encoded.final_state
    mask = np.zeros(n + 1 if variable_length else n, dtype=bool)

    positions = []
    log_prob = 0.0
    previous = START
    stopped = False
    while len(positions) < n:
        state = advance_decoder(graph, state, previous, encoded, params)
        probs = decode_step(graph, state[0], encoded, mask, params, variable_length)
        choice = int(np.argmax(probs.value))
        log_prob += float(np.log(probs.value[choice]))
        if choice == n:
            stopped = True
            break
        positions.append(choice)
        mask[choice] = True
        previous = choice
    if variable_length and not stopped:
        # Every position is taken, so the stop slot is the only candidate
        # left and carries probability exactly 1.
        stopped = True
    return Order(tuple(positions), stopped, log_prob)


@dataclass
class _Candidate:
    key: tuple        # positions, with the stop slot appended once finished
    positions: tuple
    state: tuple      # decoder (hidden, cell) after consuming the last choice
    parent: object    # candidate this one extends, until its state is built
    log_prob: float
    finished: bool


def beam_decode(sentences, params, beam_size, variable_length=False):
    """Beam search; returns (best order, the whole finished beam).

    Finished candidates stay in the beam at their final score and compete
    with live ones for the beam_size slots.  The search runs until every
    survivor is finished, which takes at most n+1 levels.
    """
    if beam_size < 1:
        raise IndexRangeError(f"beam size must be positive, got {beam_size}")
    n = len(sentences)
    graph, encoded = _prepare(sentences, params)

    root_state = advance_decoder(graph, encoded.final_state, START, encoded, params)
    beam = [_Candidate((), (), root_state, None, 0.0, False)]

    while any(not c.finished for c in beam):
        expansions = []
        for cand in beam:
            if cand.finished:
                expansions.append(cand)
                continue
            mask = np.zeros(n + 1 if variable_length else n, dtype=bool)
            mask[list(cand.positions)] = True
            probs = decode_step(graph, cand.state[0], encoded, mask, params,
                                variable_length)
            for slot in np.flatnonzero(~mask):
                slot = int(slot)
                score = cand.log_prob + float(np.log(probs.value[slot]))
                if slot == n:
                    expansions.append(_Candidate(
                        cand.key + (n,), cand.positions, None, None, score, True))
                    continue
                positions = cand.positions + (slot,)
                if len(positions) == n:
                    # The only continuation is stop (probability exactly 1 in
                    # variable-length mode, no further step otherwise).
                    key = positions + (n,) if variable_length else positions
                    expansions.append(_Candidate(key, positions, None, None, score, True))
                else:
                    expansions.append(_Candidate(
                        positions, positions, None, cand, score, False))
        expansions.sort(key=lambda c: (-c.log_prob, c.key))
        beam = expansions[:beam_size]
        for cand in beam:
            if cand.parent is not None:
                cand.state = advance_decoder(
                    graph, cand.parent.state, cand.positions[-1], encoded, params)
                cand.parent = None

    stopped = variable_length
    orders = [Order(c.positions, stopped, c.log_prob) for c in beam]
    return orders[0], orders


def exhaustive_decode(sentences, params, variable_length=False):
    """Score every admissible order and keep the best; n is capped at 8.

    Used as a reference for the beam: in fixed-length mode the candidates are
    all permutations, otherwise every stop-terminated sequence of distinct
    positions (all lengths 0..n).
    """
    n = len(sentences)
    if n > EXHAUSTIVE_LIMIT:
        raise IndexRangeError(
            f"exhaustive search over {n} sentences exceeds the limit of {EXHAUSTIVE_LIMIT}")
    if variable_length:
        candidates = (
            tuple(p) + (n,)
            for k in range(n + 1)
            for p in itertools.permutations(range(n), k)
        )
    else:
        candidates = itertools.permutations(range(n))

    best = None
    for target in candidates:
        graph = Graph(recording=False)
        lp = float(sequence_log_prob(graph, sentences, list(target), params).value)
        entry = (-lp, tuple(target))
        if best is None or entry < best[0]:
            best = (entry, lp, target)
    _, lp, target = best
    if variable_length:
        return Order(tuple(target[:-1]), True, lp)
    return Order(tuple(target), False, lp)


def rescore(sentences, params, order, variable_length=False):
    """Log-probability of an already decoded order under the model."""
    target = list(order.positions)
    if variable_length:
        if not order.stopped:
            raise InvalidOrderError("variable-length orders must be stopped")
        target.append(len(sentences))
    graph = Graph(recording=False)
    return float(sequence_log_prob(graph, sentences, target, params).value)


ORACLE_METRICS = ("pm_f", "lsr_f", "pmr")


def oracle_in_beam(beam, gold, metric):
    """Best candidate of a finished beam against the gold order.

    metric is pm_f, lsr_f, or pmr.  Ties prefer the higher log-probability,
    then the lexicographically smaller position sequence.  Returns
    (candidate, score); for pmr the score is 1.0 exactly when some candidate
    equals gold.
    """
    if metric not in ORACLE_METRICS:
        raise IndexRangeError(f"unknown oracle metric {metric!r}")
    if not beam:
        raise InvalidOrderError("oracle over an empty beam")
    gold = tuple(gold)

    def score_of(order):
        if metric == "pmr":
            return 1.0 if order.positions == gold else 0.0
        if metric == "pm_f":
            return pm_scores(order.positions, gold).f
        return lsr_scores(order.positions, gold).f

    best = None
    for order in beam:
        score = score_of(order)
        entry = (-score, -order.log_prob, order.positions)
        if best is None or entry < best[0]:
            best = (entry, order, score)
    return best[1], best[2]
