import pytest

from rmmt.core.bp_kernel import (
    BYTE_TABLE,
    CLOSE_SUMMARY,
    EMPTY_SUMMARY,
    LEAF_CAP,
    MATCH_AT_LEFT_EDGE,
    NOT_FOUND,
    OPEN_SUMMARY,
    NodeSummary,
    ParenBlock,
    blocks_from_sequence,
    bwd_search_block,
    combine,
    fold_summaries,
    fwd_search_block,
    parse_parens,
    summarize_block,
    to_text,
)
from rmmt.core.errors import OutOfRangeError


def block(text: str) -> ParenBlock:
    return ParenBlock.from_symbols(text)


def scan_summary(symbols) -> NodeSummary:
    prefixes, e = [], 0
    for s in symbols:
        e += 1 if s else -1
        prefixes.append(e)
    if not prefixes:
        return EMPTY_SUMMARY
    low = min(prefixes)
    return NodeSummary(e, low, max(prefixes), prefixes.count(low), len(prefixes))


def scan_fwd(symbols, start, delta):
    before = sum(1 if s else -1 for s in symbols[:start])
    e = before
    for j in range(start, len(symbols)):
        e += 1 if symbols[j] else -1
        if e == before + delta:
            return j
    return NOT_FOUND


def scan_bwd(symbols, start, delta):
    prefixes = [0]
    for s in symbols:
        prefixes.append(prefixes[-1] + (1 if s else -1))
    target = prefixes[start + 1] + delta
    for j in range(start - 1, -1, -1):
        if prefixes[j + 1] == target:
            return j
    return MATCH_AT_LEFT_EDGE if target == 0 else NOT_FOUND


def all_blocks(max_len):
    for n in range(max_len + 1):
        for value in range(1 << n):
            yield ParenBlock(value, n)


class TestSummaries:
    def test_empty_block(self):
        assert summarize_block(ParenBlock()) == EMPTY_SUMMARY
        assert EMPTY_SUMMARY == (0, 0, 0, 0, 0)

    @pytest.mark.parametrize("text,expected", [
        ("(()(", (2, 1, 2, 2, 4)),
        ("))", (-2, -2, -1, 1, 2)),
        ("(", (1, 1, 1, 1, 1)),
    ])
    def test_summarize_examples(self, text, expected):
        assert summarize_block(block(text)) == expected

    def test_combine_identity(self):
        x = NodeSummary(2, 1, 2, 2, 4)
        assert combine(EMPTY_SUMMARY, x) == x
        assert combine(x, EMPTY_SUMMARY) == x

    def test_combine_example(self):
        assert combine(NodeSummary(2, 1, 2, 2, 4), NodeSummary(-2, -2, -1, 1, 2)) == (0, 0, 2, 1, 6)
        assert summarize_block(block("(()())")) == (0, 0, 2, 1, 6)

    def test_combine_is_associative(self, rng):
        for _ in range(500):
            a, b, c = (block(to_text(rng.integers(0, 2, rng.integers(0, 20)).tolist())) for _ in range(3))
            sa, sb, sc = summarize_block(a), summarize_block(b), summarize_block(c)
            assert combine(sa, combine(sb, sc)) == combine(combine(sa, sb), sc)
            assert combine(combine(sa, sb), sc) == summarize_block(a + b + c)

    def test_summary_is_fold_of_symbols(self, rng):
        for _ in range(300):
            symbols = rng.integers(0, 2, rng.integers(0, LEAF_CAP + 1)).tolist()
            per_symbol = (OPEN_SUMMARY if s else CLOSE_SUMMARY for s in symbols)
            assert summarize_block(ParenBlock.from_symbols(symbols)) == fold_summaries(per_symbol)

    def test_random_split_property(self, rng):
        for _ in range(300):
            symbols = rng.integers(0, 2, rng.integers(1, LEAF_CAP + 1)).tolist()
            b = ParenBlock.from_symbols(symbols)
            cut = int(rng.integers(0, len(symbols) + 1))
            assert combine(summarize_block(b[:cut]), summarize_block(b[cut:])) == scan_summary(symbols)

    def test_byte_table_matches_scan(self):
        for byte in range(256):
            assert BYTE_TABLE[byte] == scan_summary([(byte >> k) & 1 for k in range(8)])


class TestParenBlock:
    def test_bit_layout_is_lsb_first(self):
        b = block("(()")
        assert b.bits == 0b011
        assert b.length == 3
        assert [b[k] for k in range(3)] == [1, 1, 0]

    def test_edits(self):
        b = block("(())")
        assert b.insert(2, 0).to_text() == "(()))"
        assert b.insert(0, 1).to_text() == "((())"
        assert b.delete(1).to_text() == "())"
        assert b.slice(1, 3).to_text() == "()"
        assert (block("((") + block("))")).to_text() == "(())"

    def test_excess_upto(self):
        b = block("(()")
        assert [b.excess_upto(k) for k in range(-1, 3)] == [0, 1, 2, 1]

    def test_index_out_of_range(self):
        with pytest.raises(OutOfRangeError):
            block("()")[2]

    def test_blocks_from_sequence(self):
        seq = parse_parens("(()())((()))")
        blocks = blocks_from_sequence(seq, 5)
        assert [len(b) for b in blocks] == [5, 5, 2]
        assert "".join(b.to_text() for b in blocks) == "(()())((()))"

    def test_bad_symbols_rejected(self):
        with pytest.raises(ValueError):
            ParenBlock.from_symbols([0, 1, 2])
        with pytest.raises(ValueError):
            parse_parens("(x)")


class TestBlockSearch:
    def test_fwd_examples(self):
        assert fwd_search_block(block("(())"), 1, -1) == 3
        assert fwd_search_block(block("()"), 0, 1) == 0
        assert fwd_search_block(block(")))"), 0, 1) is NOT_FOUND

    def test_bwd_examples(self):
        assert bwd_search_block(block("(()"), 2, 0) == 0
        assert bwd_search_block(block("()"), 1, 0) == MATCH_AT_LEFT_EDGE
        assert bwd_search_block(block("("), 0, -5) is NOT_FOUND

    def test_start_out_of_range(self):
        with pytest.raises(OutOfRangeError):
            fwd_search_block(block("()"), 3, 0)
        with pytest.raises(OutOfRangeError):
            bwd_search_block(block("()"), 2, 0)

    def test_exhaustive_small_blocks(self):
        for b in all_blocks(10):
            symbols = list(b.symbols())
            for start in range(len(symbols) + 1):
                for delta in range(-3, 4):
                    assert fwd_search_block(b, start, delta) == scan_fwd(symbols, start, delta)
                    if start < len(symbols):
                        assert bwd_search_block(b, start, delta) == scan_bwd(symbols, start, delta)

    def test_random_blocks(self, rng):
        for _ in range(10_000):
            n = int(rng.integers(1, LEAF_CAP + 1))
            symbols = rng.integers(0, 2, n).tolist()
            b = ParenBlock.from_symbols(symbols)
            start = int(rng.integers(0, n))
            delta = int(rng.integers(-6, 7))
            assert fwd_search_block(b, start, delta) == scan_fwd(symbols, start, delta)
            assert bwd_search_block(b, start, delta) == scan_bwd(symbols, start, delta)
