"""Adjusted conditional distributions with recorded sequences excluded.

An :class:`ExclusionTrie` represents the distribution obtained from a base
model by removing a finite set of recorded sequences and rescaling all
remaining sequences uniformly. It stores, per touched prefix, a sparse
vector of probability mass subtracted from the base conditional; the
adjusted conditional at a prefix is ``normalize(base - corrections)``.

Recording a sequence walks it backward from its last token to the prompt
boundary, at each prefix subtracting the (pre-update) adjusted probability
of the remaining suffix from the conditional entry on the path and
renormalizing. After the walk the recorded sequence has probability zero
and every other sequence's probability is scaled by ``1 / (1 - p)`` where
``p`` was the recorded sequence's adjusted probability. When a node's mass
is exhausted the same walk zeroes the parent's entry for it, so dead
subtrees propagate upward within a single update.

The base model is consulted lazily on every adjusted-conditional
evaluation; wrap it in a :class:`~aprad.core.CountingModel` to account for
those evaluations. A trie belongs to one generation episode and is mutable;
do not share it across concurrent episodes.
"""

from __future__ import annotations

import numpy as np

from .core import Model, Sequence

#: A node whose post-subtraction mass falls below this is fully excluded.
DEAD_NODE_TOL = 1e-12

DUMP_HEADER = "exclusion-trie v1"


class FullyExcludedError(RuntimeError):
    """Every continuation of the prefix is a recorded exclusion."""

    def __init__(self, prefix: Sequence):
        super().__init__(f"all continuations of prefix {prefix!r} are excluded")
        self.prefix = tuple(prefix)


class ExclusionTrie:
    def __init__(self, base: Model):
        self.base = base
        self.vocab = base.vocab
        self._corrections: dict[Sequence, np.ndarray] = {}
        self._dead: set[Sequence] = set()
        self._excluded_mass = 0.0

    @property
    def excluded_mass(self) -> float:
        """Total base-model probability of the recorded sequences."""
        return self._excluded_mass

    @property
    def corrected_prefixes(self) -> frozenset[Sequence]:
        return frozenset(self._corrections)

    def is_fully_excluded(self, prefix: Sequence) -> bool:
        return tuple(prefix) in self._dead

    def conditional(self, prefix: Sequence) -> np.ndarray:
        """Adjusted next-token distribution at ``prefix``.

        Raises FullyExcludedError when every continuation is excluded; the
        check happens before the base model is consulted, so dead prefixes
        never cost an invocation.
        """
        prefix = tuple(prefix)
        if prefix in self._dead:
            raise FullyExcludedError(prefix)
        base = self.base.conditional(prefix)
        corr = self._corrections.get(prefix)
        if corr is None:
            return base
        mass = np.clip(base - corr, 0.0, None)
        total = mass.sum()
        if total < DEAD_NODE_TOL:
            self._dead.add(prefix)
            raise FullyExcludedError(prefix)
        return mass / total

    def add_bad_sample(self, seq: Sequence, prompt_len: int = 0) -> None:
        """Record ``seq`` as excluded; its adjusted probability becomes zero.

        A no-op when the sequence is already excluded. Prompt positions are
        never adjusted: corrections start at ``prompt_len``. Touches exactly
        ``len(seq) - prompt_len`` prefixes.
        """
        seq = tuple(seq)
        if not prompt_len <= len(seq):
            raise ValueError("sequence shorter than its prompt")
        if len(seq) == prompt_len:
            return
        # Forward pass: pre-update adjusted conditional of each path entry.
        adj = []
        for i in range(prompt_len, len(seq)):
            try:
                adj.append(float(self.conditional(seq[:i])[seq[i]]))
            except FullyExcludedError:
                return  # unreachable prefix: sequence already has probability 0
            if adj[-1] <= 0.0:
                return
        self._excluded_mass += float(np.prod(adj)) * (1.0 - self._excluded_mass)
        # Backward pass; `suffix` is the pre-update adjusted probability of
        # seq[i+1:] given seq[:i+1], so the amount subtracted at prefix
        # seq[:i] in unnormalized space is mass[seq[i]] * suffix.
        suffix = 1.0
        for i in range(len(seq) - 1, prompt_len - 1, -1):
            prefix = seq[:i]
            base = self.base.conditional(prefix)
            corr = self._corrections.get(prefix)
            if corr is None:
                corr = np.zeros(self.vocab.size)
                self._corrections[prefix] = corr
            entry = max(0.0, float(base[seq[i]]) - float(corr[seq[i]]))
            corr[seq[i]] += entry * suffix
            remaining = np.clip(base - corr, 0.0, None).sum()
            if remaining < DEAD_NODE_TOL:
                self._dead.add(prefix)
            suffix *= adj[i - prompt_len]

    def sequence_probability(self, seq: Sequence, prompt_len: int = 0) -> float:
        """Product of adjusted conditionals along ``seq``; zero if excluded."""
        seq = tuple(seq)
        p = 1.0
        for i in range(prompt_len, len(seq)):
            try:
                p *= float(self.conditional(seq[:i])[seq[i]])
            except FullyExcludedError:
                return 0.0
            if p == 0.0:
                return 0.0
        return p

    def dump(self) -> str:
        """Deterministic line-oriented rendering of all corrected prefixes."""
        lines = [DUMP_HEADER]
        for prefix in sorted(self._corrections, key=lambda p: (len(p), p)):
            label = self.vocab.render(prefix, sep=".") or "-"
            if prefix in self._dead:
                lines.append(f"{label} : fully-excluded")
                continue
            try:
                dist = self.conditional(prefix)
            except FullyExcludedError:
                lines.append(f"{label} : fully-excluded")
                continue
            body = " ".join(f"{x:.12g}" for x in dist)
            lines.append(f"{label} : {body}")
        return "\n".join(lines) + "\n"
