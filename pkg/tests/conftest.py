"""Shared test helpers: brute-force oracles independent of the library code."""

import itertools

import numpy as np

from aprad import TableModel, Vocab


def enumerate_sequences(vocab_size, length):
    return list(itertools.product(range(vocab_size), repeat=length))


def brute_force_sequence_probs(model, length):
    """Sequence probabilities by explicit enumeration of conditionals."""
    out = {}
    for seq in enumerate_sequences(model.vocab.size, length):
        p = 1.0
        for i in range(length):
            p *= float(model.conditional(seq[:i])[seq[i]])
        out[seq] = p
    return out


def brute_force_excluded_probs(model, length, bad_prefixes):
    """Expected adjusted distribution: zero the bad subtrees, rescale the rest.

    ``bad_prefixes`` must be prefix-free. Every full-length sequence that
    extends a bad prefix gets probability zero; all others are divided by
    one minus the total excluded base mass.
    """
    base = brute_force_sequence_probs(model, length)

    def is_bad(seq):
        return any(seq[: len(b)] == tuple(b) for b in bad_prefixes)

    bad_mass = sum(p for s, p in base.items() if is_bad(s))
    out = {}
    for s, p in base.items():
        out[s] = 0.0 if is_bad(s) else p / (1.0 - bad_mass)
    return out


def random_table_model(rng, vocab_size, depth, min_weight=0.05):
    """Random fully-specified conditional table over all prefixes up to depth."""
    labels = "ABCDEFGH"[:vocab_size]
    table = {}
    for ln in range(depth):
        for prefix in enumerate_sequences(vocab_size, ln):
            w = rng.random(vocab_size) + min_weight
            table[prefix] = w / w.sum()
    return TableModel(Vocab.from_string(labels), table)


def random_prefix_free_set(rng, vocab_size, max_len, max_size):
    """Random prefix-free family of sequences with lengths in [1, max_len]."""
    out = []
    for _ in range(max_size):
        ln = int(rng.integers(1, max_len + 1))
        cand = tuple(int(t) for t in rng.integers(0, vocab_size, ln))
        if not any(
            cand[: len(b)] == b or b[: len(cand)] == cand for b in out
        ):
            out.append(cand)
    return out
