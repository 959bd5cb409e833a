import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aprad import (
    BannedSymbolSet,
    PatternParseError,
    PatternSet,
    Vocab,
    format_pattern_spec,
    parse_pattern_spec,
    verify_prefix_closure,
)

ABC = Vocab.from_string("ABC")


def ps(text):
    return parse_pattern_spec(text, ABC)


class TestPatternContains:
    def test_single_pattern(self):
        oracle = ps("AAA")
        assert not oracle.contains((0, 0, 1))
        assert oracle.contains((0, 0, 0))
        assert not oracle.contains((0, 0))

    def test_extension_stays_error(self):
        assert ps("AAA").contains((0, 0, 0, 1))

    def test_wildcard_with_exception(self):
        oracle = ps("A** except AAC")
        assert not oracle.contains((0, 0, 2))  # AAC exempted
        assert oracle.contains((0, 1, 1))      # ABB
        assert not oracle.contains((1, 0, 0))  # BAA not covered

    def test_membership_ignores_tail(self):
        oracle = ps("AB*")
        for tail in itertools.product(range(3), repeat=2):
            assert oracle.contains((0, 1, 2) + tail)
            assert not oracle.contains((1, 1, 2) + tail)


class TestParse:
    def test_plain_list(self):
        oracle = ps("AAA, AAC")
        assert oracle.include == ((0, 0, 0), (0, 0, 2))
        assert oracle.except_ == ()

    def test_wildcards_with_exceptions(self):
        oracle = ps("*** except AAA, BAA")
        survivors = [
            s for s in itertools.product(range(3), repeat=3) if not oracle.contains(s)
        ]
        assert survivors == [(0, 0, 0), (1, 0, 0)]

    def test_empty_spec_is_empty_set(self):
        oracle = ps("")
        for n in range(4):
            for s in itertools.product(range(3), repeat=n):
                assert not oracle.contains(s)

    def test_unknown_symbol_position(self):
        with pytest.raises(PatternParseError) as err:
            ps("AAX")
        assert err.value.position == 2

    def test_inconsistent_lengths(self):
        with pytest.raises(PatternParseError):
            ps("AAA, AB")

    def test_wildcard_in_exception(self):
        with pytest.raises(PatternParseError):
            ps("*** except A*A")

    def test_exception_must_match_a_pattern(self):
        with pytest.raises(PatternParseError):
            ps("A** except BBB")

    def test_whitespace_tolerated(self):
        assert ps(" AAA ,AAC ") == ps("AAA, AAC")

    def test_except_survivor_count(self):
        # "*** except S" leaves exactly |S| non-error sequences
        oracle = ps("*** except AAA, AAB, ABA, BAA")
        survivors = sum(
            1 for s in itertools.product(range(3), repeat=3) if not oracle.contains(s)
        )
        assert survivors == 4


@st.composite
def pattern_specs(draw):
    n_patterns = draw(st.integers(1, 4))
    length = draw(st.integers(1, 4))
    symbols = "ABC*"
    pats = [
        "".join(draw(st.sampled_from(symbols)) for _ in range(length))
        for _ in range(n_patterns)
    ]
    text = ", ".join(pats)
    # optionally add exceptions drawn from sequences matching some pattern
    if draw(st.booleans()):
        concrete = []
        for pat in pats:
            seq = "".join(draw(st.sampled_from("ABC")) if c == "*" else c for c in pat)
            concrete.append(seq)
        text += " except " + ", ".join(sorted(set(concrete)))
    return text


class TestRoundTrip:
    @given(pattern_specs())
    @settings(max_examples=200)
    def test_parse_format_parse(self, text):
        first = parse_pattern_spec(text, ABC)
        assert parse_pattern_spec(format_pattern_spec(first), ABC) == first

    def test_empty_round_trip(self):
        assert format_pattern_spec(ps("")) == ""


class TestBannedSymbols:
    def test_absent(self):
        oracle = BannedSymbolSet(ABC, frozenset({0}))
        assert not oracle.contains((1, 2, 1))

    def test_present(self):
        oracle = BannedSymbolSet(ABC, frozenset({0}))
        assert oracle.contains((1, 0, 2))

    def test_extensions_stay_errors(self):
        oracle = BannedSymbolSet(ABC, frozenset({0}))
        seq = (1, 2, 0)
        assert oracle.contains(seq)
        for t in range(3):
            assert oracle.contains(seq + (t,))

    def test_must_leave_a_token(self):
        with pytest.raises(ValueError):
            BannedSymbolSet(ABC, frozenset({0, 1, 2}))


class _LengthTwoOracle:
    """Deliberately not prefix-closed: flags exactly the length-2 sequences."""

    def contains(self, seq):
        return len(seq) == 2


class TestPrefixClosure:
    def test_pattern_oracle_closed(self):
        # two tokens beyond the pattern length
        assert verify_prefix_closure(ps("AAA"), ABC, max_len=5) is None

    def test_except_oracle_closed(self):
        assert verify_prefix_closure(ps("A** except AAC"), ABC, max_len=5) is None

    def test_banned_oracle_closed(self):
        oracle = BannedSymbolSet(ABC, frozenset({1}))
        assert verify_prefix_closure(oracle, ABC, max_len=4) is None

    def test_adversarial_counterexample(self):
        counter = verify_prefix_closure(_LengthTwoOracle(), ABC, max_len=3)
        assert counter is not None
        flagged, extension = counter
        assert len(flagged) == 2 and len(extension) == 3
