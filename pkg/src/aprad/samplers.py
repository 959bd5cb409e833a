"""Error-free generation strategies over a shared backtracking loop.

Four samplers are provided:

* ``unconstrained_generate`` ignores the oracle entirely.
* ``rejection_sample`` regenerates whole sequences until one is clean.
* ``error_free_decoding`` samples token-by-token from an exclusion trie,
  records each discovered error, and delegates the resumption point to a
  strategy: restart from the prompt (sampling without replacement), delete
  only the offending token (constrained decoding), or pick the resumption
  point probabilistically by running speculative acceptance between the
  pre- and post-exclusion distributions (approximately aligned decoding).

All randomness is drawn from a single generator in program order: one
uniform per sampled token, one per speculative acceptance test (skipped
when the ratio is >= 1), one per replacement draw. Two runs with the same
seed therefore produce identical sequences until the first oracle hit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .core import (
    CountingModel,
    EpisodeStats,
    GenerationLimits,
    InvocationBudgetError,
    Model,
    Sequence,
    sample_token,
)
from .exclusion import ExclusionTrie, FullyExcludedError
from .oracles import ErrorOracle

Conditional = Callable[[Sequence], np.ndarray]


@dataclass(frozen=True)
class GenerationOutcome:
    """Final sequence plus episode instrumentation.

    ``completed`` is False when the invocation budget ran out or every
    remaining continuation was excluded; the sequence is then the last
    error-free prefix reached.
    """

    sequence: Sequence
    stats: EpisodeStats
    completed: bool


def residual_distribution(target: np.ndarray, draft: np.ndarray) -> np.ndarray | None:
    """Normalized positive part of ``target - draft``; None if empty."""
    resid = np.clip(np.asarray(target, dtype=float) - np.asarray(draft, dtype=float), 0.0, None)
    total = resid.sum()
    if total <= 0.0:
        return None
    return resid / total


def spec_sample(
    target: Conditional,
    draft: Conditional | Mapping[Sequence, np.ndarray],
    n: int,
    seq: Sequence,
    rng,
) -> Sequence:
    """Speculative acceptance: convert a draft-distribution sample into a
    target-distribution one.

    ``seq[n:]`` must have been sampled from ``draft``. Each position is
    accepted with probability ``min(1, target/draft)``; the first rejection
    returns the kept prefix plus one replacement token from the normalized
    positive residual ``max(0, target - draft)``. If every position is
    accepted, the whole sequence is returned with one fresh token drawn
    from the target.

    A residual with no positive mass can only arise from floating-point
    drift; the replacement then falls back to the target conditional.
    """
    seq = tuple(seq)
    draft_at = draft.__getitem__ if isinstance(draft, Mapping) else draft
    for i in range(n, len(seq)):
        prefix = seq[:i]
        target_dist = target(prefix)
        draft_dist = draft_at(prefix)
        t = float(target_dist[seq[i]])
        d = float(draft_dist[seq[i]])
        if t >= d:
            if t > 0.0:
                continue  # ratio >= 1 (or infinite), accepted without a coin flip
        elif rng.random() < t / d:
            continue
        resid = residual_distribution(target_dist, draft_dist)
        if resid is None:
            resid = np.array(target_dist, dtype=float)
        return prefix + (sample_token(resid, rng),)
    return seq + (sample_token(target(seq), rng),)


class Strategy:
    """Resumption rule applied after an error has been recorded.

    ``resume`` receives the pre-update conditionals along the error
    sequence, the updated trie, the error sequence itself, and the prompt
    length; it returns a prefix of the sequence, possibly with one
    replacement token appended, of length at least ``prompt_len``.
    """

    name = "strategy"

    def resume(
        self,
        draft_conditionals: Mapping[Sequence, np.ndarray],
        trie: ExclusionTrie,
        seq: Sequence,
        prompt_len: int,
        rng,
    ) -> Sequence:
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__}>"


class AsapStrategy(Strategy):
    """Backtrack to the prompt: exact sampling without replacement."""

    name = "asap"

    def resume(self, draft_conditionals, trie, seq, prompt_len, rng):
        return seq[:prompt_len]


class ConstrainedStrategy(Strategy):
    """Delete only the offending token.

    The trie update zeroed that token at its prefix, so resampling realizes
    per-token masking of immediately erroneous continuations; when the
    prefix has no tokens left the deletion cascades upward one position at
    a time (handled by the decoding loop).
    """

    name = "constrained"

    def resume(self, draft_conditionals, trie, seq, prompt_len, rng):
        return seq[:-1]


class ApradStrategy(Strategy):
    """Probabilistic backtracking via speculative acceptance between the
    pre-exclusion (draft) and post-exclusion (target) distributions."""

    name = "aprad"

    def resume(self, draft_conditionals, trie, seq, prompt_len, rng):
        return spec_sample(trie.conditional, draft_conditionals, prompt_len, seq, rng)


def asap_strategy() -> Strategy:
    return AsapStrategy()


def constrained_strategy() -> Strategy:
    return ConstrainedStrategy()


def aprad_strategy() -> Strategy:
    return ApradStrategy()


STRATEGIES: dict[str, Callable[[], Strategy]] = {
    "asap": asap_strategy,
    "constrained": constrained_strategy,
    "aprad": aprad_strategy,
}


def unconstrained_generate(
    model: Model,
    prompt: Sequence,
    limits: GenerationLimits,
    rng,
    trace: list | None = None,
) -> GenerationOutcome:
    """Plain autoregressive sampling until EOS or the token limit."""
    prompt = tuple(prompt)
    counting = CountingModel(model, budget=limits.invocation_budget)
    stats = EpisodeStats()
    seq = prompt
    completed = False
    try:
        while True:
            if len(seq) - len(prompt) >= limits.max_tokens:
                completed = True
                break
            tok = sample_token(counting.conditional(seq), rng)
            seq += (tok,)
            if trace is not None:
                trace.append(("token", len(seq), tok))
            if limits.stop_on_eos and model.eos_id is not None and tok == model.eos_id:
                completed = True
                break
    except InvocationBudgetError:
        stats.budget_exhausted = True
    stats.invocations = counting.invocations
    stats.output_tokens = len(seq) - len(prompt)
    return GenerationOutcome(seq, stats, completed)


def rejection_sample(
    model: Model,
    oracle: ErrorOracle,
    prompt: Sequence,
    limits: GenerationLimits,
    rng,
    trace: list | None = None,
) -> GenerationOutcome:
    """Regenerate until the oracle accepts the whole output.

    Every attempt is a full regeneration paying fresh invocations; the
    budget is shared across attempts. Each rejected attempt counts as one
    discovered error.
    """
    prompt = tuple(prompt)
    stats = EpisodeStats()
    remaining = limits.invocation_budget
    seq = prompt
    while True:
        attempt_limits = GenerationLimits(
            max_tokens=limits.max_tokens,
            invocation_budget=remaining,
            stop_on_eos=limits.stop_on_eos,
        )
        out = unconstrained_generate(model, prompt, attempt_limits, rng, trace)
        stats.invocations += out.stats.invocations
        if remaining is not None:
            remaining -= out.stats.invocations
        seq = out.sequence
        if out.stats.budget_exhausted:
            stats.budget_exhausted = True
            break
        if not oracle.contains(seq):
            stats.output_tokens = len(seq) - len(prompt)
            return GenerationOutcome(seq, stats, out.completed)
        stats.errors_discovered += 1
        if trace is not None:
            trace.append(("error", len(seq)))
        if remaining is not None and remaining <= 0:
            stats.budget_exhausted = True
            break
    # Budget ran out: return the longest error-free prefix of the last attempt.
    while oracle.contains(seq) and len(seq) > len(prompt):
        seq = seq[:-1]
    stats.output_tokens = len(seq) - len(prompt)
    return GenerationOutcome(seq, stats, False)


def error_free_decoding(
    model: Model,
    oracle: ErrorOracle,
    prompt: Sequence,
    strategy: Strategy,
    limits: GenerationLimits,
    rng,
    trace: list | None = None,
) -> GenerationOutcome:
    """Sample from the base model with discovered errors excluded.

    After each emitted token (including replacement tokens produced by a
    strategy) the whole sequence is checked against the oracle; on an
    error, the sequence is recorded in the exclusion trie and the strategy
    chooses where to resume. Completed outcomes are never errors.
    """
    prompt = tuple(prompt)
    if oracle.contains(prompt):
        raise ValueError("prompt is already an error; nothing can be generated")
    counting = CountingModel(model, budget=limits.invocation_budget)
    trie = ExclusionTrie(counting)
    stats = EpisodeStats()
    n = len(prompt)
    seq = prompt
    completed = False
    blocked = False
    try:
        while True:
            if len(seq) - n >= limits.max_tokens:
                completed = True
                break
            try:
                dist = trie.conditional(seq)
            except FullyExcludedError:
                if len(seq) == n:
                    blocked = True  # every continuation of the prompt is excluded
                    break
                seq = seq[:-1]  # constrained-style cascade into the parent
                stats.backtracks += 1
                continue
            tok = sample_token(dist, rng)
            seq += (tok,)
            if trace is not None:
                trace.append(("token", len(seq), tok))
            while oracle.contains(seq):
                stats.errors_discovered += 1
                if trace is not None:
                    trace.append(("error", len(seq)))
                draft = {seq[:i]: trie.conditional(seq[:i]) for i in range(n, len(seq))}
                trie.add_bad_sample(seq, n)
                before = len(seq)
                try:
                    seq = strategy.resume(draft, trie, seq, n, rng)
                except FullyExcludedError:
                    blocked = True  # only reachable when the prompt node died
                    break
                if len(seq) < before - 1:
                    stats.backtracks += 1
                if trace is not None:
                    trace.append(("resume", len(seq)))
            if blocked:
                break
            if (
                limits.stop_on_eos
                and model.eos_id is not None
                and len(seq) > n
                and seq[-1] == model.eos_id
            ):
                completed = True
                break
    except InvocationBudgetError:
        stats.budget_exhausted = True
        if oracle.contains(seq):
            seq = seq[:-1]  # drop the not-yet-resolved error token
    stats.invocations = counting.invocations
    stats.output_tokens = len(seq) - n
    return GenerationOutcome(seq, stats, completed)


def generate(
    method: str,
    model: Model,
    oracle: ErrorOracle,
    prompt: Sequence,
    limits: GenerationLimits,
    rng,
    trace: list | None = None,
) -> GenerationOutcome:
    """Run one episode of the named method.

    Methods: ``unconstrained``, ``rejection``, ``constrained``, ``asap``,
    ``aprad``.
    """
    if method == "unconstrained":
        return unconstrained_generate(model, prompt, limits, rng, trace)
    if method == "rejection":
        return rejection_sample(model, oracle, prompt, limits, rng, trace)
    try:
        strategy = STRATEGIES[method]()
    except KeyError:
        raise ValueError(f"unknown method {method!r}") from None
    return error_free_decoding(model, oracle, prompt, strategy, limits, rng, trace)


METHODS = ("unconstrained", "rejection", "constrained", "asap", "aprad")
