"""Shared test utilities: independent reference math and fixture builders.

The reference implementations here deliberately repeat the model arithmetic
in flat numpy, without the autodiff graph, so graph plumbing (masking, key
caching, the factorized attention) is checked against a second, simpler
derivation.  Brute-force enumerators provide oracles for the metric and
search code.
"""

from __future__ import annotations

import itertools

import numpy as np

from ordernet.encoders import EncoderConfig
from ordernet.model import PtrNetParams

# ---------------------------------------------------------------------------
# fixture builders
# ---------------------------------------------------------------------------

TINY_DIMS = dict(embed_dim=6, filter_lengths=(2, 3), feature_maps=3,
                 recurrent_dim=5)


def tiny_params(kind, seed, vocab_size=12, hidden_dim=7):
    """A small model of the given encoder kind with deterministic weights."""
    config = EncoderConfig(kind=kind, **TINY_DIMS)
    return PtrNetParams.create(config, hidden_dim, vocab_size, seed)


def overwrite_well_scaled(params, seed, low=0.1, high=0.5):
    """Replace every parameter with values bounded away from zero.

    Finite differences lose all significant digits on coordinates whose true
    gradient is near the rounding floor, so gradient-check fixtures draw
    sign * U(low, high) values: combined with an L2 term in the objective,
    every coordinate keeps a healthy gradient magnitude.
    """
    rng = np.random.default_rng(seed)
    for t in params.all_params():
        sign = rng.choice([-1.0, 1.0], size=t.value.shape)
        t.value[...] = sign * rng.uniform(low, high, size=t.value.shape)


def random_sentences(rng, vocab_size, n_sentences, max_words=4):
    """Random token-id sentences (ids 1.., so the padding row stays unused)."""
    return [
        [int(rng.integers(1, vocab_size)) for _ in range(int(rng.integers(1, max_words + 1)))]
        for _ in range(n_sentences)
    ]


# ---------------------------------------------------------------------------
# reference forward pass (flat numpy, no graph)
# ---------------------------------------------------------------------------

def ref_sigmoid(v):
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def ref_lstm_step(x, h_prev, c_prev, w, b):
    """One LSTM transition with gates packed (input, output, forget, candidate)."""
    d = h_prev.shape[0]
    pre = np.concatenate([x, h_prev]) @ w + b
    gate_in = ref_sigmoid(pre[:d])
    gate_out = ref_sigmoid(pre[d:2 * d])
    gate_forget = ref_sigmoid(pre[2 * d:3 * d])
    candidate = np.tanh(pre[3 * d:])
    c = c_prev * gate_forget + candidate * gate_in
    return gate_out * np.tanh(c), c


def ref_sentence_vector(params, token_ids):
    """Encode one sentence with the configured encoder, in flat numpy."""
    emb = params.embeddings.value
    vectors = [emb[t] for t in token_ids]
    kind = params.encoder.kind
    if kind == "cbow":
        return np.mean(vectors, axis=0)
    if kind == "cnn":
        pooled = []
        for f in params.cnn_filters:
            vecs = list(vectors)
            while len(vecs) < f.width:
                vecs.append(np.zeros_like(vecs[0]))
            rows = np.stack([
                np.concatenate(vecs[k:k + f.width])
                for k in range(len(vecs) - f.width + 1)
            ])
            pooled.append(np.tanh(rows @ f.w.value + f.b.value).max(axis=0))
        return np.concatenate(pooled)
    h = np.zeros(params.word_cell.state_dim)
    c = np.zeros(params.word_cell.state_dim)
    for x in vectors:
        h, c = ref_lstm_step(x, h, c, params.word_cell.w.value,
                             params.word_cell.b.value)
    return h


def ref_context(params, sentences):
    """Sentence vectors and context-encoder states over the given order."""
    sent_vecs = [ref_sentence_vector(params, s) for s in sentences]
    h = np.zeros(params.hidden_dim)
    c = np.zeros(params.hidden_dim)
    hiddens = []
    for vec in sent_vecs:
        h, c = ref_lstm_step(vec, h, c, params.context_cell.w.value,
                             params.context_cell.b.value)
        hiddens.append(h)
    return sent_vecs, hiddens, (h, c)


def ref_step_probs(params, hiddens, decoder_hidden, mask, allow_stop):
    """Pointing distribution from the unfactorized per-position logit.

    Each slot's logit is attn_v . tanh(attn_w^T [key_j ; decoder_hidden]),
    evaluated one slot at a time on the full concatenated vector, which is
    the form the production code splits into key and query halves.
    """
    keys = list(hiddens)
    if allow_stop:
        keys.append(params.stop_key.value)
    logits = np.array([
        np.tanh(np.concatenate([key, decoder_hidden]) @ params.attn_w.value)
        @ params.attn_v.value
        for key in keys
    ])
    keep = ~np.asarray(mask, dtype=bool)
    probs = np.zeros_like(logits)
    shifted = np.exp(logits[keep] - logits[keep].max())
    probs[keep] = shifted / shifted.sum()
    return probs


def ref_log_prob(params, sentences, target):
    """Teacher-forced log-probability of `target`, all in flat numpy."""
    n = len(sentences)
    allow_stop = target[-1] == n
    sent_vecs, hiddens, state = ref_context(params, sentences)

    w_dec = params.decoder_cell.w.value
    b_dec = params.decoder_cell.b.value
    mask = np.zeros(n + 1 if allow_stop else n, dtype=bool)
    x = params.start_input.value
    total = 0.0
    for t in target:
        state = ref_lstm_step(x, state[0], state[1], w_dec, b_dec)
        probs = ref_step_probs(params, hiddens, state[0], mask, allow_stop)
        total += np.log(probs[t])
        if t < n:
            mask[t] = True
            x = sent_vecs[t]
    return total


# ---------------------------------------------------------------------------
# brute-force oracles
# ---------------------------------------------------------------------------

def brute_lcs_length(a, b):
    """Longest common subsequence by enumerating subsequences of `a`.

    Exponential in len(a); used only as an oracle against the DP version.
    """
    a, b = list(a), list(b)
    best = 0
    for r in range(len(a), 0, -1):
        if r <= best:
            break
        for picked in itertools.combinations(a, r):
            if _is_subsequence(picked, b):
                best = r
                break
    return best


def _is_subsequence(candidate, sequence):
    it = iter(sequence)
    return all(any(x == y for y in it) for x in candidate)


def all_fixed_orders(n):
    """Every permutation of range(n) as target sequences."""
    return [list(p) for p in itertools.permutations(range(n))]


def all_stop_orders(n):
    """Every stop-terminated sequence of distinct positions, all lengths."""
    return [
        list(p) + [n]
        for k in range(n + 1)
        for p in itertools.permutations(range(n), k)
    ]
