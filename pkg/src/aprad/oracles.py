"""Prefix-closed error-set oracles.

An oracle answers "is this token sequence undesirable?" and must be
prefix-closed: once a sequence is flagged, every extension of it is flagged
too. Oracles are pure and stateless, so samplers may query them freely
without affecting invocation accounting.
"""

from __future__ import annotations

import itertools
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

from .core import Sequence, Vocab


class PatternParseError(ValueError):
    """Pattern-set specification rejected; ``position`` is the offending index."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class ErrorOracle(ABC):
    @abstractmethod
    def contains(self, seq: Sequence) -> bool:
        """True when ``seq`` (or any prefix of it) is an error."""


@dataclass(frozen=True)
class PatternSet(ErrorOracle):
    """Fixed-length wildcard patterns with exact-sequence exceptions.

    A sequence is an error iff it is at least ``length`` tokens long, its
    first ``length`` tokens match one of ``include`` (None entries are
    wildcards), and that head is not listed in ``except_``. Membership
    depends only on the head, which makes the set prefix-closed; sequences
    shorter than ``length`` are never errors.
    """

    vocab: Vocab
    length: int
    include: tuple[tuple[int | None, ...], ...]
    except_: tuple[Sequence, ...] = ()

    def __post_init__(self):
        for pat in self.include:
            if len(pat) != self.length:
                raise ValueError("all patterns must share one length")
            for t in pat:
                if t is not None and not 0 <= t < self.vocab.size:
                    raise ValueError(f"pattern token id {t} outside vocabulary")
        for exc in self.except_:
            if len(exc) != self.length:
                raise ValueError("exception entries must have the pattern length")
            if not any(_matches(pat, exc) for pat in self.include):
                raise ValueError(
                    f"exception {self.vocab.render(exc)!r} matches no include pattern"
                )

    def contains(self, seq: Sequence) -> bool:
        if not self.include or len(seq) < self.length:
            return False
        head = tuple(seq[: self.length])
        if head in self.except_:
            return False
        return any(_matches(pat, head) for pat in self.include)


def _matches(pattern, seq) -> bool:
    return all(p is None or p == s for p, s in zip(pattern, seq))


def parse_pattern_spec(text: str, vocab: Vocab) -> PatternSet:
    """Parse the textual pattern-set DSL.

    Grammar: ``spec := pattern_list [" except " seq_list]`` where both lists
    are comma-separated. A pattern is a run of single-character vocabulary
    labels and ``*`` wildcards; all patterns must share one length, and
    exception entries may not contain wildcards. The empty string denotes
    the empty error set.
    """
    if text.strip() == "":
        return PatternSet(vocab=vocab, length=0, include=())
    marker = " except "
    idx = text.find(marker)
    if idx >= 0:
        include_text, except_text = text[:idx], text[idx + len(marker):]
        except_offset = idx + len(marker)
        if except_text.find(marker) >= 0:
            raise PatternParseError(
                "multiple 'except' clauses", except_offset + except_text.find(marker)
            )
    else:
        include_text, except_text, except_offset = text, "", len(text)

    include = _parse_list(include_text, vocab, 0, allow_wildcard=True)
    except_pats = _parse_list(except_text, vocab, except_offset, allow_wildcard=False)
    if not include:
        raise PatternParseError("empty pattern list", 0)
    length = len(include[0][0])
    for pat, off in include + except_pats:
        if len(pat) != length:
            raise PatternParseError(
                f"pattern length {len(pat)} differs from {length}", off
            )
    try:
        return PatternSet(
            vocab=vocab,
            length=length,
            include=tuple(tuple(p) for p, _ in include),
            except_=tuple(tuple(p) for p, _ in except_pats),
        )
    except ValueError as e:
        raise PatternParseError(str(e)) from e


def _parse_list(text: str, vocab: Vocab, base_offset: int, allow_wildcard: bool):
    """Comma-separated patterns -> list of (token-or-None tuples, source offset)."""
    out = []
    cursor = 0
    for chunk in text.split(","):
        stripped = chunk.strip()
        if stripped:
            offset = base_offset + cursor + chunk.index(stripped[0])
            pat = []
            for j, ch in enumerate(stripped):
                if ch == "*":
                    if not allow_wildcard:
                        raise PatternParseError(
                            "wildcard not allowed in exception entry", offset + j
                        )
                    pat.append(None)
                else:
                    try:
                        pat.append(vocab.id_of(ch))
                    except KeyError:
                        raise PatternParseError(
                            f"unknown symbol {ch!r}", offset + j
                        ) from None
            out.append((tuple(pat), offset))
        cursor += len(chunk) + 1
    return out


def format_pattern_spec(ps: PatternSet) -> str:
    """Canonical text for a pattern set; parse(format(ps)) == ps."""
    if not ps.include:
        return ""
    def render(pat):
        return "".join("*" if t is None else ps.vocab.label(t) for t in pat)
    text = ", ".join(render(p) for p in ps.include)
    if ps.except_:
        text += " except " + ", ".join(ps.vocab.render(e) for e in ps.except_)
    return text


@dataclass(frozen=True)
class BannedSymbolSet(ErrorOracle):
    """Flags any sequence containing one of the banned token ids."""

    vocab: Vocab
    banned: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "banned", frozenset(self.banned))
        if any(not 0 <= t < self.vocab.size for t in self.banned):
            raise ValueError("banned token id outside vocabulary")
        if len(self.banned) >= self.vocab.size:
            raise ValueError("at least one token must remain allowed")

    def contains(self, seq: Sequence) -> bool:
        return any(t in self.banned for t in seq)


def verify_prefix_closure(
    oracle: ErrorOracle, vocab: Vocab, max_len: int
) -> tuple[Sequence, Sequence] | None:
    """Exhaustively check prefix closure on all sequences up to ``max_len``.

    Returns None when closed, otherwise the first counterexample as a pair
    (flagged sequence, unflagged extension). Checking single-token
    extensions suffices: closure violations compose transitively.
    """
    for length in range(max_len):
        for seq in itertools.product(range(vocab.size), repeat=length):
            if not oracle.contains(seq):
                continue
            for t in range(vocab.size):
                ext = seq + (t,)
                if not oracle.contains(ext):
                    return seq, ext
    return None
