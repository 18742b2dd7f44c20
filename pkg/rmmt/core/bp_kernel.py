"""
Sequential primitives over raw parenthesis blocks.

A block is a bit-packed slice of a balanced-parentheses sequence: bit k of
``ParenBlock.bits`` is the symbol at local position k (1 = open, 0 = close).
Excess values follow one convention everywhere: ``excess(i)`` is the
inclusive prefix sum of +1/-1 up to position i, and ``excess(-1) = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import OutOfRangeError

OPEN = 1
CLOSE = 0

# Five 64-bit words, one bit per parenthesis
LEAF_CAP = 320

NOT_FOUND = None
MATCH_AT_LEFT_EDGE = -1

ParenSeq = Union[bytes, bytearray, memoryview, Sequence[int], str]

TEXT_TO_BITS = bytes.maketrans(b"()", b"\x01\x00")
_BITS_TO_TEXT = bytes.maketrans(b"\x01\x00", b"()")


class NodeSummary(NamedTuple):
    """Summary of a contiguous range of parentheses."""
    total_excess: int = 0
    min_excess: int = 0
    max_excess: int = 0
    min_count: int = 0
    num_parens: int = 0


EMPTY_SUMMARY = NodeSummary()
OPEN_SUMMARY = NodeSummary(1, 1, 1, 1, 1)
CLOSE_SUMMARY = NodeSummary(-1, -1, -1, 1, 1)


def combine(left: NodeSummary, right: NodeSummary) -> NodeSummary:
    """Summary of the concatenation ``left . right``. EMPTY_SUMMARY is the identity."""
    if not left.num_parens:
        return right
    if not right.num_parens:
        return left
    shifted_min = left.total_excess + right.min_excess
    if left.min_excess < shifted_min:
        min_excess, min_count = left.min_excess, left.min_count
    elif left.min_excess > shifted_min:
        min_excess, min_count = shifted_min, right.min_count
    else:
        min_excess, min_count = shifted_min, left.min_count + right.min_count
    return NodeSummary(
        left.total_excess + right.total_excess,
        min_excess,
        max(left.max_excess, left.total_excess + right.max_excess),
        min_count,
        left.num_parens + right.num_parens,
    )


def fold_summaries(summaries: Iterable[NodeSummary]) -> NodeSummary:
    result = EMPTY_SUMMARY
    for summary in summaries:
        result = combine(result, summary)
    return result


def _build_byte_table() -> tuple:
    table = []
    for byte in range(256):
        summary = EMPTY_SUMMARY
        for k in range(8):  # LSB first
            summary = combine(summary, OPEN_SUMMARY if (byte >> k) & 1 else CLOSE_SUMMARY)
        table.append(summary)
    return tuple(table)


# Per-byte summaries, used to skip whole bytes in summaries and scans
BYTE_TABLE = _build_byte_table()


def parse_parens(text: str) -> bytes:
    """'(()' -> b'\\x01\\x01\\x00'. Characters other than parentheses are not allowed."""
    raw = text.encode("ascii")
    if raw.strip(b"()"):
        raise ValueError(f"not a parenthesis string: {text!r}")
    return raw.translate(TEXT_TO_BITS)


def to_text(seq: Sequence[int]) -> str:
    return bytes(seq).translate(_BITS_TO_TEXT).decode("ascii")


def as_symbol_array(seq: ParenSeq) -> np.ndarray:
    """Coerce any supported sequence form into a uint8 array of 0/1 symbols."""
    if isinstance(seq, str):
        seq = parse_parens(seq)
    if isinstance(seq, (bytes, bytearray, memoryview)):
        if not len(seq):
            return np.zeros(0, dtype=np.uint8)
        arr = np.frombuffer(seq, dtype=np.uint8)
    else:
        arr = np.asarray(seq, dtype=np.uint8)
    if arr.size and int(arr.max()) > 1:
        raise ValueError("symbols must be 0 (close) or 1 (open)")
    return arr


@dataclass(frozen=True, slots=True)
class ParenBlock:
    """Immutable bit-packed run of parentheses; updates return new blocks."""
    bits: int = 0
    length: int = 0

    @classmethod
    def from_symbols(cls, symbols: ParenSeq) -> ParenBlock:
        arr = as_symbol_array(symbols)
        packed = np.packbits(arr, bitorder="little").tobytes()
        return cls(int.from_bytes(packed, "little"), int(arr.size))

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, pos):
        if isinstance(pos, slice):
            start, stop, _ = pos.indices(self.length)
            return self.slice(start, stop)
        if not 0 <= pos < self.length:
            raise OutOfRangeError(f"block position {pos} outside [0, {self.length})")
        return (self.bits >> pos) & 1

    def symbols(self) -> bytes:
        bits = self.bits
        return bytes((bits >> k) & 1 for k in range(self.length))

    def to_text(self) -> str:
        return to_text(self.symbols())

    def insert(self, pos: int, symbol: int) -> ParenBlock:
        low = self.bits & ((1 << pos) - 1)
        high = self.bits >> pos
        return ParenBlock(low | ((symbol & 1) << pos) | (high << (pos + 1)), self.length + 1)

    def delete(self, pos: int) -> ParenBlock:
        low = self.bits & ((1 << pos) - 1)
        high = self.bits >> (pos + 1)
        return ParenBlock(low | (high << pos), self.length - 1)

    def slice(self, start: int, stop: int) -> ParenBlock:
        start = max(start, 0)
        stop = min(stop, self.length)
        if stop <= start:
            return ParenBlock()
        return ParenBlock((self.bits >> start) & ((1 << (stop - start)) - 1), stop - start)

    def concat(self, other: ParenBlock) -> ParenBlock:
        return ParenBlock(self.bits | (other.bits << self.length), self.length + other.length)

    __add__ = concat

    def excess_upto(self, pos: int) -> int:
        """Local inclusive prefix excess at ``pos``; ``pos = -1`` gives 0."""
        count = pos + 1
        opens = (self.bits & ((1 << count) - 1)).bit_count()
        return 2 * opens - count


def blocks_from_sequence(seq: ParenSeq, block_size: int) -> list:
    """Cut a sequence into consecutive blocks of ``block_size`` symbols (last may be short)."""
    arr = as_symbol_array(seq)
    n = int(arr.size)
    packed = np.packbits(arr, bitorder="little").tobytes()
    blocks = []
    for start in range(0, n, block_size):
        stop = min(start + block_size, n)
        chunk = packed[start // 8:(stop + 7) // 8]
        bits = (int.from_bytes(chunk, "little") >> (start % 8)) & ((1 << (stop - start)) - 1)
        blocks.append(ParenBlock(bits, stop - start))
    return blocks


def summarize_block(block: ParenBlock) -> NodeSummary:
    n = block.length
    if not n:
        return EMPTY_SUMMARY
    data = block.bits.to_bytes((n + 7) // 8, "little")
    full = n // 8
    summary = EMPTY_SUMMARY
    for byte in data[:full]:
        summary = combine(summary, BYTE_TABLE[byte])
    if n % 8:
        tail = data[full]
        for k in range(n % 8):
            summary = combine(summary, OPEN_SUMMARY if (tail >> k) & 1 else CLOSE_SUMMARY)
    return summary


def scan_forward(block: ParenBlock, start: int, excess_before: int, target: int) -> Optional[int]:
    """
    Smallest local j >= start whose running excess equals ``target``, where the
    running excess just before ``start`` is ``excess_before``.
    """
    bits, n = block.bits, block.length
    excess = excess_before
    k = start
    while k < n:
        if not k & 7 and k + 8 <= n:
            entry = BYTE_TABLE[(bits >> k) & 0xFF]
            if not excess + entry.min_excess <= target <= excess + entry.max_excess:
                excess += entry.total_excess
                k += 8
                continue
        excess += 1 if (bits >> k) & 1 else -1
        if excess == target:
            return k
        k += 1
    return NOT_FOUND


def scan_backward(block: ParenBlock, end: int, excess_at_end: int, target: int) -> Optional[int]:
    """
    Largest local j <= end whose running excess equals ``target``, where the
    running excess at ``end`` is ``excess_at_end``. Position -1 is not examined.
    """
    bits = block.bits
    excess = excess_at_end
    k = end
    while k >= 0:
        if k & 7 == 7:
            entry = BYTE_TABLE[(bits >> (k - 7)) & 0xFF]
            before = excess - entry.total_excess
            if not before + entry.min_excess <= target <= before + entry.max_excess:
                excess = before
                k -= 8
                continue
        if excess == target:
            return k
        excess -= 1 if (bits >> k) & 1 else -1
        k -= 1
    return NOT_FOUND


def fwd_search_block(block: ParenBlock, start_pos: int, target_delta: int) -> Optional[int]:
    if not 0 <= start_pos <= block.length:
        raise OutOfRangeError(f"start {start_pos} outside [0, {block.length}]")
    base = block.excess_upto(start_pos - 1)
    return scan_forward(block, start_pos, base, base + target_delta)


def bwd_search_block(block: ParenBlock, start_pos: int, target_delta: int) -> Optional[int]:
    if not 0 <= start_pos < block.length:
        raise OutOfRangeError(f"start {start_pos} outside [0, {block.length})")
    here = block.excess_upto(start_pos)
    target = here + target_delta
    found = scan_backward(block, start_pos - 1, block.excess_upto(start_pos - 1), target)
    if found is NOT_FOUND and target == 0:
        return MATCH_AT_LEFT_EDGE
    return found
