"""Token-level primitives: vocabularies, probability vectors, autoregressive
model interfaces, sampling transforms, and invocation accounting.

Sequences are plain tuples of token ids. Probability vectors ("dists") are
1-D float64 numpy arrays that sum to one; functions in this module treat
them as immutable and return fresh arrays rather than mutating inputs.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

Sequence = tuple[int, ...]

#: Tolerance for probability-vector validity checks.
DIST_TOL = 1e-9


class AllZeroError(ValueError):
    """Raised when a weight vector with no positive mass is normalized."""


class InvalidDistError(ValueError):
    """Raised when a vector violates the probability-distribution contract."""


class InvocationBudgetError(RuntimeError):
    """Raised when a model evaluation would exceed the invocation budget."""


@dataclass(frozen=True)
class Vocab:
    """An ordered set of distinct token labels."""

    tokens: tuple[str, ...]

    def __post_init__(self):
        if len(self.tokens) < 1:
            raise ValueError("vocabulary must contain at least one token")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("token labels must be unique")

    @classmethod
    def from_string(cls, labels: str) -> "Vocab":
        """Build a vocabulary of single-character tokens, one per character."""
        return cls(tuple(labels))

    @property
    def size(self) -> int:
        return len(self.tokens)

    def id_of(self, label: str) -> int:
        try:
            return self.tokens.index(label)
        except ValueError:
            raise KeyError(f"unknown token label {label!r}") from None

    def label(self, token_id: int) -> str:
        return self.tokens[token_id]

    def render(self, seq: Iterable[int], sep: str = "") -> str:
        return sep.join(self.tokens[t] for t in seq)

    def parse(self, text: str) -> Sequence:
        """Inverse of :meth:`render` for single-character labels."""
        return tuple(self.id_of(ch) for ch in text)


def normalize(weights) -> np.ndarray:
    """Scale a non-negative weight vector to sum to one.

    Raises AllZeroError when no entry is positive; callers that can reach an
    all-zero vector (e.g. exhausted exclusion nodes) must handle it.
    """
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if not total > 0.0:
        raise AllZeroError("cannot normalize a vector with no positive mass")
    return w / total


def check_distribution(dist, size: int | None = None) -> np.ndarray:
    """Validate a probability vector, returning it as a float64 array."""
    d = np.asarray(dist, dtype=float)
    if d.ndim != 1:
        raise InvalidDistError("distribution must be one-dimensional")
    if size is not None and d.shape[0] != size:
        raise InvalidDistError(f"expected length {size}, got {d.shape[0]}")
    if np.any(d < 0):
        raise InvalidDistError("distribution has negative entries")
    if abs(d.sum() - 1.0) > DIST_TOL:
        raise InvalidDistError(f"distribution sums to {d.sum()!r}, not 1")
    return d


def sample_token(dist: np.ndarray, rng) -> int:
    """Draw one token id from a probability vector.

    Consumes exactly one uniform variate from ``rng``; deterministic given
    the generator state.
    """
    u = rng.random()
    cum = np.cumsum(dist)
    idx = int(np.searchsorted(cum, u, side="right"))
    if idx >= len(dist):
        # u landed past the accumulated mass (sum < 1 by float drift);
        # fall back to the last token with positive probability.
        idx = int(np.max(np.nonzero(dist)[0]))
    return idx


def apply_temperature(dist: np.ndarray, t: float) -> np.ndarray:
    """Sharpen (t < 1) or flatten (t > 1) a distribution: p_i ** (1/t), renormalized."""
    if t <= 0:
        raise ValueError("temperature must be positive")
    if t == 1.0:
        return np.array(dist, dtype=float)
    return normalize(np.power(np.asarray(dist, dtype=float), 1.0 / t))


def apply_top_k(dist: np.ndarray, k: int) -> np.ndarray:
    """Keep the k most probable tokens (ties broken by lower id), renormalize."""
    if k < 1:
        raise ValueError("k must be at least 1")
    d = np.asarray(dist, dtype=float)
    if k >= d.shape[0]:
        return np.array(d)
    # lexsort: primary key descending probability, secondary ascending id
    order = np.lexsort((np.arange(d.shape[0]), -d))
    out = np.zeros_like(d)
    keep = order[:k]
    out[keep] = d[keep]
    return normalize(out)


def apply_top_p(dist: np.ndarray, p: float) -> np.ndarray:
    """Keep the smallest descending-probability prefix with cumulative mass >= p."""
    if not 0.0 < p <= 1.0:
        raise ValueError("p must be in (0, 1]")
    d = np.asarray(dist, dtype=float)
    if p >= 1.0:
        return np.array(d)
    order = np.lexsort((np.arange(d.shape[0]), -d))
    cum = np.cumsum(d[order])
    # 1e-9 slack so that e.g. 0.5 + 0.3 >= 0.8 despite binary rounding
    cutoff = int(np.searchsorted(cum, p - DIST_TOL, side="left")) + 1
    out = np.zeros_like(d)
    keep = order[:cutoff]
    out[keep] = d[keep]
    return normalize(out)


class Model(ABC):
    """Deterministic conditional-distribution provider over a vocabulary.

    ``conditional(prefix)`` must return the same distribution every time it
    is called with the same prefix. Returned arrays are treated as read-only
    by all callers in this package.
    """

    vocab: Vocab
    eos_id: int | None = None

    @abstractmethod
    def conditional(self, prefix: Sequence) -> np.ndarray:
        """Next-token distribution given the tokens generated so far."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.flags.writeable = False
    return arr


class UniformModel(Model):
    """Assigns equal probability to every token at every step."""

    def __init__(self, vocab: Vocab, eos_id: int | None = None):
        self.vocab = vocab
        self.eos_id = eos_id
        self._dist = _frozen(np.full(vocab.size, 1.0 / vocab.size))

    def conditional(self, prefix: Sequence) -> np.ndarray:
        return self._dist


class TableModel(Model):
    """Conditionals looked up in an explicit prefix table, with a default.

    Useful for constructing small models with arbitrary conditional
    structure in tests and experiments.
    """

    def __init__(
        self,
        vocab: Vocab,
        table: Mapping[Sequence, object] | None = None,
        default: object = None,
        eos_id: int | None = None,
    ):
        self.vocab = vocab
        self.eos_id = eos_id
        if default is None:
            default = np.full(vocab.size, 1.0 / vocab.size)
        self._default = _frozen(check_distribution(default, vocab.size))
        self._table: dict[Sequence, np.ndarray] = {}
        for prefix, dist in (table or {}).items():
            self._table[tuple(prefix)] = _frozen(check_distribution(dist, vocab.size))

    def conditional(self, prefix: Sequence) -> np.ndarray:
        return self._table.get(tuple(prefix), self._default)


class TransformedModel(Model):
    """Applies temperature / top-k / top-p to every conditional of an inner model.

    Transforms compose as a pipeline in that order, before any sampling or
    exclusion adjustment downstream.
    """

    def __init__(
        self,
        inner: Model,
        temperature: float | None = None,
        top_k: int | None = None,
        top_p: float | None = None,
    ):
        self.inner = inner
        self.vocab = inner.vocab
        self.eos_id = inner.eos_id
        self.temperature = temperature
        self.top_k = top_k
        self.top_p = top_p

    def conditional(self, prefix: Sequence) -> np.ndarray:
        d = self.inner.conditional(prefix)
        if self.temperature is not None:
            d = apply_temperature(d, self.temperature)
        if self.top_k is not None:
            d = apply_top_k(d, self.top_k)
        if self.top_p is not None:
            d = apply_top_p(d, self.top_p)
        return d


def sequence_probability(model: Model, seq: Sequence, prompt_len: int = 0) -> float:
    """Probability of generating ``seq[prompt_len:]`` given its prompt prefix."""
    seq = tuple(seq)
    p = 1.0
    for i in range(prompt_len, len(seq)):
        p *= float(model.conditional(seq[:i])[seq[i]])
        if p == 0.0:
            break
    return p


@dataclass
class EpisodeStats:
    """Instrumentation for one generation episode.

    ``invocations`` counts model evaluations that could not be served from
    the retained per-position cache (see :class:`CountingModel`); the
    generation ratio is invocations per emitted output token.
    """

    invocations: int = 0
    output_tokens: int = 0
    backtracks: int = 0
    errors_discovered: int = 0
    budget_exhausted: bool = False

    @property
    def generation_ratio(self) -> float:
        if self.output_tokens == 0:
            return math.nan
        return self.invocations / self.output_tokens


@dataclass(frozen=True)
class GenerationLimits:
    """Stopping conditions for one episode.

    ``invocation_budget`` of None means unlimited; the budget is checked
    before each uncached model evaluation.
    """

    max_tokens: int
    invocation_budget: int | None = None
    stop_on_eos: bool = True

    def __post_init__(self):
        if self.max_tokens < 0:
            raise ValueError("max_tokens must be non-negative")
        if self.invocation_budget is not None and self.invocation_budget < 1:
            raise ValueError("invocation_budget must be at least 1")


class CountingModel(Model):
    """Wraps a model, counting evaluations under autoregressive-cache costing.

    The wrapper retains the most recent evaluation at each position (the way
    an incremental decoder keeps state for the current sequence only):
    re-evaluating the same prefix at a position is free, but evaluating a
    *different* prefix of the same length evicts the old entry, so walking
    back into a previously abandoned branch is paid for again. Unbroken
    left-to-right generation therefore costs exactly one invocation per
    emitted token, while restart-style backtracking re-pays for the tokens
    it regenerates.

    Results are bit-identical to the inner model's. The wrapper belongs to a
    single episode and is not thread-safe.
    """

    def __init__(self, inner: Model, budget: int | None = None):
        self.inner = inner
        self.vocab = inner.vocab
        self.eos_id = inner.eos_id
        self.budget = budget
        self.invocations = 0
        self._by_depth: dict[int, tuple[Sequence, np.ndarray]] = {}

    def conditional(self, prefix: Sequence) -> np.ndarray:
        prefix = tuple(prefix)
        entry = self._by_depth.get(len(prefix))
        if entry is not None and entry[0] == prefix:
            return entry[1]
        if self.budget is not None and self.invocations >= self.budget:
            raise InvocationBudgetError(
                f"invocation budget of {self.budget} exhausted"
            )
        dist = self.inner.conditional(prefix)
        self._by_depth[len(prefix)] = (prefix, dist)
        self.invocations += 1
        return dist

    def reset_episode(self) -> None:
        """Clear the cache and the invocation counter."""
        self._by_depth.clear()
        self.invocations = 0
