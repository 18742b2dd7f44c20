"""
Dynamic range min-max tree over a balanced-parentheses sequence.

A B+ tree of arity five whose leaves hold bit-packed ParenBlocks of at most
``leaf_cap`` symbols and whose nodes each carry the NodeSummary of their range.
Every node is a versioned cell: its ``state`` is a ``(version, payload)``
tuple replaced as a whole, and all reads and writes go through a NodeView so
the same algorithms run directly or under the speculative engine.

Positions are 0-based parenthesis indices; ``excess(i)`` is inclusive and
``excess(-1) = 0``.
"""

from __future__ import annotations

import itertools
import logging
import struct
from enum import IntEnum
from typing import Iterator, List, NamedTuple, Optional, Tuple

from .bp_kernel import (
    CLOSE,
    EMPTY_SUMMARY,
    LEAF_CAP,
    MATCH_AT_LEFT_EDGE,
    NOT_FOUND,
    OPEN,
    NodeSummary,
    ParenBlock,
    ParenSeq,
    blocks_from_sequence,
    combine,
    fold_summaries,
    scan_backward,
    scan_forward,
    summarize_block,
)
from .config import DEFAULT_LEAF_FILL
from .errors import (
    BadRangeError,
    ExcessOverflowError,
    InvalidWrapError,
    NotCloseError,
    NotOpenError,
    OutOfRangeError,
    UnbalancedError,
)
from .models import ValidationReport, Violation

logger = logging.getLogger(__name__)

ARITY = 5
MIN_CHILDREN = (ARITY + 1) // 2
NO_PARENT = None
ANCHOR_ID = -1

EXCESS_LIMIT = 2**31 - 1

# 40 bytes of child references (or leaf bits), five 32-bit summary values, 4-byte discriminator
NODE_LAYOUT = struct.Struct("<40s3i2II")
_CHILD_REFS = struct.Struct(f"<{ARITY}Q")


class NodeKind(IntEnum):
    INTERNAL = 0
    LEAF = 1


class NodePayload(NamedTuple):
    kind: NodeKind
    summary: NodeSummary
    children: tuple = ()
    block: ParenBlock = ParenBlock()


class RootInfo(NamedTuple):
    root: "VersionedCell"
    height: int


class VersionedCell:
    """A unit of conflict detection: one tree node, or the root anchor."""
    __slots__ = ("cell_id", "state")

    def __init__(self, cell_id: int, value, version: int = 0):
        self.cell_id = cell_id
        self.state = (version, value)

    def __repr__(self) -> str:
        return f"<cell {self.cell_id} v{self.state[0]}>"


def leaf_payload(block: ParenBlock) -> NodePayload:
    return NodePayload(NodeKind.LEAF, summarize_block(block), (), block)


def internal_payload(kids: List[Tuple[VersionedCell, NodePayload]]) -> NodePayload:
    return NodePayload(
        NodeKind.INTERNAL,
        fold_summaries(payload.summary for _, payload in kids),
        tuple(node for node, _ in kids),
    )


def pack_node(payload: NodePayload) -> bytes:
    """Pack a node into its 64-byte line; raises struct.error or OverflowError if it does not fit."""
    if payload.kind is NodeKind.LEAF:
        region = payload.block.bits.to_bytes(40, "little")
    else:
        ids = [child.cell_id for child in payload.children]
        region = _CHILD_REFS.pack(*(ids + [0] * (ARITY - len(ids))))
    s = payload.summary
    return NODE_LAYOUT.pack(region, s.total_excess, s.min_excess, s.max_excess,
                            s.min_count, s.num_parens, int(payload.kind))


class NodeView:
    """
    Direct access to tree cells, for sequential callers and for writers that
    hold the structure exclusively. With ``track=True`` the ids of cells read,
    written and created are recorded.
    """

    def __init__(self, tree: "Rmmt", track: bool = False, journal: Optional[list] = None):
        self.tree = tree
        self.track = track
        self.journal = journal
        self.read_ids: set = set()
        self.written_ids: set = set()
        self.created_ids: set = set()

    def load(self, cell: VersionedCell):
        if self.track:
            self.read_ids.add(cell.cell_id)
        return cell.state[1]

    def store(self, cell: VersionedCell, value) -> None:
        if self.track:
            self.written_ids.add(cell.cell_id)
        self.tree.clock += 1
        cell.state = (self.tree.clock, value)

    def create(self, payload: NodePayload) -> VersionedCell:
        node = VersionedCell(self.tree.next_node_id(), payload, self.tree.clock)
        if self.track:
            self.created_ids.add(node.cell_id)
        return node

    def record(self, name: str, *args) -> None:
        """Note a concrete mutation applied through this view."""
        if self.journal is not None:
            self.journal.append((name, args))


class Rmmt:
    """The tree handle. Not thread-safe on its own; share it through a ConcurrencyEngine."""

    def __init__(self, leaf_cap: int = LEAF_CAP):
        if leaf_cap < 2:
            raise ValueError("leaf_cap must be at least 2")
        self.leaf_cap = leaf_cap
        self.min_leaf = leaf_cap // 2
        self.clock = 0
        self._ids = itertools.count()
        self.anchor = VersionedCell(ANCHOR_ID, None)
        self.direct = NodeView(self)

    def next_node_id(self) -> int:
        return next(self._ids)

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def build(cls, seq: ParenSeq, leaf_fill: float = DEFAULT_LEAF_FILL,
              leaf_cap: int = LEAF_CAP) -> Rmmt:
        """Bottom-up construction from a flat sequence."""
        if not 0 < leaf_fill <= 1:
            raise ValueError(f"leaf_fill must be in (0, 1], got {leaf_fill}")
        tree = cls(leaf_cap)
        per_leaf = max(tree.min_leaf, int(leaf_fill * leaf_cap), 1)
        blocks = blocks_from_sequence(seq, per_leaf) or [ParenBlock()]
        if len(blocks) > 1 and len(blocks[-1]) < tree.min_leaf:
            merged = blocks[-2] + blocks[-1]
            if len(merged) <= leaf_cap:
                blocks[-2:] = [merged]
            else:
                half = (len(merged) + 1) // 2
                blocks[-2:] = [merged[:half], merged[half:]]

        level = []
        for block in blocks:
            payload = leaf_payload(block)
            level.append((VersionedCell(tree.next_node_id(), payload), payload))
        height = 1
        while len(level) > 1:
            groups = [level[k:k + ARITY] for k in range(0, len(level), ARITY)]
            if len(groups) > 1 and len(groups[-1]) < MIN_CHILDREN:
                tail = groups[-2] + groups[-1]
                half = (len(tail) + 1) // 2
                groups[-2:] = [tail[:half], tail[half:]]
            level = []
            for group in groups:
                payload = internal_payload(group)
                level.append((VersionedCell(tree.next_node_id(), payload), payload))
            height += 1

        root, root_payload = level[0]
        s = root_payload.summary
        if s.max_excess > EXCESS_LIMIT or s.min_excess < -EXCESS_LIMIT:
            raise ExcessOverflowError("excess does not fit in 32 bits")
        tree.anchor.state = (0, RootInfo(root, height))
        logger.info("Built RMMT: %d parentheses, %d leaves, height %d",
                    s.num_parens, len(blocks), height)
        return tree

    # ------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------

    def _view(self, view: Optional[NodeView]) -> NodeView:
        return self.direct if view is None else view

    def _root_payload(self, view: NodeView) -> NodePayload:
        return view.load(view.load(self.anchor).root)

    def _check_position(self, i: int, n: int) -> None:
        if not 0 <= i < n:
            raise OutOfRangeError(f"position {i} outside [0, {n})")

    def _locate(self, view: NodeView, i: int):
        """
        Descend to the leaf holding position i. Returns the internal path as
        (payload, child index) pairs, the leaf payload, the offset inside it,
        the leaf's first position and the excess just before it.
        """
        payload = self._root_payload(view)
        n = payload.summary.num_parens
        self._check_position(i, n)
        stack = []
        pos = i
        start = 0
        base = 0
        while payload.kind is NodeKind.INTERNAL:
            for idx, child in enumerate(payload.children):
                child_payload = view.load(child)
                s = child_payload.summary
                if pos < s.num_parens:
                    break
                pos -= s.num_parens
                start += s.num_parens
                base += s.total_excess
            stack.append((payload, idx))
            payload = child_payload
        return stack, payload, pos, start, base

    def _units(self, view: NodeView, payload: NodePayload):
        if payload.kind is NodeKind.LEAF:
            return payload.block
        return [(child, view.load(child)) for child in payload.children]

    @staticmethod
    def _payload(units) -> NodePayload:
        if isinstance(units, ParenBlock):
            return leaf_payload(units)
        return internal_payload(units)

    # ------------------------------------------------------------------
    # Queries
    # ------------------------------------------------------------------

    def total_size(self, view: Optional[NodeView] = None) -> int:
        return self._root_payload(self._view(view)).summary.num_parens

    def height(self, view: Optional[NodeView] = None) -> int:
        return self._view(view).load(self.anchor).height

    def root_summary(self, view: Optional[NodeView] = None) -> NodeSummary:
        return self._root_payload(self._view(view)).summary

    def access(self, i: int, view: Optional[NodeView] = None) -> int:
        _, leaf, offset, _, _ = self._locate(self._view(view), i)
        return leaf.block[offset]

    def excess(self, i: int, view: Optional[NodeView] = None) -> int:
        _, leaf, offset, _, base = self._locate(self._view(view), i)
        return base + leaf.block.excess_upto(offset)

    def fwd_search(self, i: int, d: int, view: Optional[NodeView] = None) -> Optional[int]:
        """Smallest j > i with excess(j) = excess(i) + d."""
        view = self._view(view)
        stack, leaf, offset, start, base = self._locate(view, i)
        here = base + leaf.block.excess_upto(offset)
        target = here + d
        found = scan_forward(leaf.block, offset + 1, here, target)
        if found is not NOT_FOUND:
            return start + found
        excess = base + leaf.summary.total_excess
        pos = start + leaf.summary.num_parens
        for payload, idx in reversed(stack):
            for child in payload.children[idx + 1:]:
                child_payload = view.load(child)
                s = child_payload.summary
                if s.num_parens and excess + s.min_excess <= target <= excess + s.max_excess:
                    return self._descend_forward(view, child_payload, excess, pos, target)
                excess += s.total_excess
                pos += s.num_parens
        return NOT_FOUND

    def _descend_forward(self, view, payload, excess, pos, target) -> int:
        while payload.kind is NodeKind.INTERNAL:
            for child in payload.children:
                child_payload = view.load(child)
                s = child_payload.summary
                if s.num_parens and excess + s.min_excess <= target <= excess + s.max_excess:
                    payload = child_payload
                    break
                excess += s.total_excess
                pos += s.num_parens
            else:
                raise AssertionError("summary bounds promised a match that no child holds")
        return pos + scan_forward(payload.block, 0, excess, target)

    def bwd_search(self, i: int, d: int, view: Optional[NodeView] = None) -> Optional[int]:
        """
        Largest j < i with excess(j) = excess(i) + d; MATCH_AT_LEFT_EDGE when
        only the sentinel excess(-1) = 0 matches.
        """
        view = self._view(view)
        stack, leaf, offset, start, base = self._locate(view, i)
        block = leaf.block
        here = base + block.excess_upto(offset)
        target = here + d
        before_here = here - (1 if block[offset] else -1)
        found = scan_backward(block, offset - 1, before_here, target)
        if found is not NOT_FOUND:
            return start + found
        excess_end = base
        pos_end = start - 1
        for payload, idx in reversed(stack):
            for child in reversed(payload.children[:idx]):
                child_payload = view.load(child)
                s = child_payload.summary
                before = excess_end - s.total_excess
                if s.num_parens and before + s.min_excess <= target <= before + s.max_excess:
                    return self._descend_backward(view, child_payload, excess_end, pos_end, target)
                excess_end = before
                pos_end -= s.num_parens
        return MATCH_AT_LEFT_EDGE if target == 0 else NOT_FOUND

    def _descend_backward(self, view, payload, excess_end, pos_end, target) -> int:
        while payload.kind is NodeKind.INTERNAL:
            for child in reversed(payload.children):
                child_payload = view.load(child)
                s = child_payload.summary
                before = excess_end - s.total_excess
                if s.num_parens and before + s.min_excess <= target <= before + s.max_excess:
                    payload = child_payload
                    break
                excess_end = before
                pos_end -= s.num_parens
            else:
                raise AssertionError("summary bounds promised a match that no child holds")
        last = payload.block.length - 1
        return pos_end - last + scan_backward(payload.block, last, excess_end, target)

    def _require(self, view: NodeView, i: int, symbol: int) -> None:
        if self.access(i, view) != symbol:
            if symbol == OPEN:
                raise NotOpenError(f"position {i} holds a close parenthesis")
            raise NotCloseError(f"position {i} holds an open parenthesis")

    def find_close(self, i: int, view: Optional[NodeView] = None) -> int:
        view = self._view(view)
        self._require(view, i, OPEN)
        return self.fwd_search(i, -1, view)

    def find_open(self, i: int, view: Optional[NodeView] = None) -> int:
        view = self._view(view)
        self._require(view, i, CLOSE)
        found = self.bwd_search(i, 0, view)
        return NOT_FOUND if found is NOT_FOUND else found + 1

    def enclose(self, i: int, view: Optional[NodeView] = None) -> Optional[int]:
        view = self._view(view)
        self._require(view, i, OPEN)
        if self.excess(i, view) == 1:
            return NO_PARENT
        found = self.bwd_search(i, -2, view)
        return NO_PARENT if found is NOT_FOUND else found + 1

    def depth(self, i: int, view: Optional[NodeView] = None) -> int:
        view = self._view(view)
        self._require(view, i, OPEN)
        return self.excess(i, view)

    def subtree_size(self, i: int, view: Optional[NodeView] = None) -> int:
        close = self.find_close(i, view)
        return (close - i + 1) // 2

    def range_min(self, i: int, j: int, view: Optional[NodeView] = None) -> Tuple[int, int]:
        """(minimum excess over positions i..j, number of positions attaining it)."""
        view = self._view(view)
        root = self._root_payload(view)
        n = root.summary.num_parens
        self._check_position(i, n)
        self._check_position(j, n)
        if i > j:
            raise BadRangeError(f"empty range [{i}, {j}]")
        s = self._range_summary(view, root, i, j)
        before = self.excess(i - 1, view) if i else 0
        return before + s.min_excess, s.min_count

    def _range_summary(self, view, payload, lo: int, hi: int) -> NodeSummary:
        if payload.kind is NodeKind.LEAF:
            return summarize_block(payload.block[lo:hi + 1])
        if lo == 0 and hi == payload.summary.num_parens - 1:
            return payload.summary
        result = EMPTY_SUMMARY
        start = 0
        for child in payload.children:
            child_payload = view.load(child)
            end = start + child_payload.summary.num_parens - 1
            if end >= lo and start <= hi:
                result = combine(result, self._range_summary(
                    view, child_payload, max(lo, start) - start, min(hi, end) - start))
            if end >= hi:
                break
            start = end + 1
        return result

    # ------------------------------------------------------------------
    # Updates
    # ------------------------------------------------------------------

    def insert_pair(self, i: int, j: int, view: Optional[NodeView] = None) -> None:
        """Wrap the slice [i, j) of the current sequence in a new pair."""
        view = self._view(view)
        root = self._root_payload(view)
        n = root.summary.num_parens
        if not 0 <= i <= j <= n:
            raise OutOfRangeError(f"wrap [{i}, {j}) outside [0, {n}]")
        if j > i:
            s = self._range_summary(view, root, i, j - 1)
            if s.total_excess != 0 or s.min_excess < 0:
                raise InvalidWrapError(f"slice [{i}, {j}) is not a run of complete subtrees")
        view.record("insert_pair", i, j)
        self._insert_symbol(view, j, CLOSE)
        self._insert_symbol(view, i, OPEN)

    def insert_leaf(self, i: int, view: Optional[NodeView] = None) -> None:
        self.insert_pair(i, i, view)

    def delete_pair(self, i: int, view: Optional[NodeView] = None) -> None:
        """Remove the pair opened at i; its children move up to its parent."""
        view = self._view(view)
        close = self.find_close(i, view)
        if close is NOT_FOUND:
            raise UnbalancedError(f"open at {i} has no matching close")
        view.record("delete_pair", i)
        self._delete_symbol(view, close)
        self._delete_symbol(view, i)

    def _descend_for_update(self, view: NodeView, pos: int, inclusive_end: bool):
        root_info = view.load(self.anchor)
        node = root_info.root
        payload = view.load(node)
        path = []
        while payload.kind is NodeKind.INTERNAL:
            last = len(payload.children) - 1
            for idx, child in enumerate(payload.children):
                child_payload = view.load(child)
                n = child_payload.summary.num_parens
                if pos < n or (inclusive_end and pos == n) or idx == last:
                    break
                pos -= n
            path.append((node, payload, idx))
            node, payload = child, child_payload
        return root_info, path, node, payload, pos

    def _insert_symbol(self, view: NodeView, pos: int, symbol: int) -> None:
        root_info, path, leaf, payload, offset = self._descend_for_update(view, pos, True)
        self._rebalance_after_update(view, root_info, path, leaf, payload.block.insert(offset, symbol))

    def _delete_symbol(self, view: NodeView, pos: int) -> None:
        root_info, path, leaf, payload, offset = self._descend_for_update(view, pos, False)
        self._rebalance_after_update(view, root_info, path, leaf, payload.block.delete(offset))

    def _rebalance_after_update(self, view: NodeView, root_info: RootInfo, path, node, units) -> None:
        """
        ``node`` (bottom of ``path``) now holds ``units``: a ParenBlock for a
        leaf, a list of (child, payload) for an internal node. Split on
        overflow, steal or merge on underflow, and recompute summaries up to
        the root.
        """
        cap, minimum = self.leaf_cap, self.min_leaf
        while path:
            parent, parent_payload, idx = path.pop()
            kids = self._units(view, parent_payload)
            if len(units) > cap:
                half = (len(units) + 1) // 2
                left, right = self._payload(units[:half]), self._payload(units[half:])
                view.store(node, left)
                sibling = view.create(right)
                kids[idx:idx + 1] = [(node, left), (sibling, right)]
                logger.debug("split node %d -> %d + %d units", node.cell_id, half, len(units) - half)
            elif len(units) < minimum and len(kids) > 1:
                self._steal_or_merge(view, kids, idx, node, units, minimum)
            else:
                payload = self._payload(units)
                view.store(node, payload)
                kids[idx] = (node, payload)
            node, units = parent, kids
            cap, minimum = ARITY, MIN_CHILDREN
        self._settle_root(view, root_info, node, units, cap)

    def _steal_or_merge(self, view, kids, idx, node, units, minimum) -> None:
        deficit = minimum - len(units)
        if idx > 0:
            left_node, left_payload = kids[idx - 1]
            left_units = self._units(view, left_payload)
            if len(left_units) - deficit >= minimum:
                cut = len(left_units) - deficit
                self._store_pair(view, kids, idx - 1, left_node, left_units[:cut],
                                 node, left_units[cut:] + units)
                logger.debug("node %d stole %d units from left sibling", node.cell_id, deficit)
                return
        if idx + 1 < len(kids):
            right_node, right_payload = kids[idx + 1]
            right_units = self._units(view, right_payload)
            if len(right_units) - deficit >= minimum:
                self._store_pair(view, kids, idx, node, units + right_units[:deficit],
                                 right_node, right_units[deficit:])
                logger.debug("node %d stole %d units from right sibling", node.cell_id, deficit)
                return
        if idx > 0:
            merged = self._payload(left_units + units)
            view.store(left_node, merged)
            kids[idx - 1:idx + 1] = [(left_node, merged)]
            logger.debug("merged node %d into left sibling %d", node.cell_id, left_node.cell_id)
        else:
            merged = self._payload(units + right_units)
            view.store(node, merged)
            kids[idx:idx + 2] = [(node, merged)]
            logger.debug("merged right sibling %d into node %d", right_node.cell_id, node.cell_id)

    def _store_pair(self, view, kids, idx, left_node, left_units, right_node, right_units) -> None:
        left, right = self._payload(left_units), self._payload(right_units)
        view.store(left_node, left)
        view.store(right_node, right)
        kids[idx:idx + 2] = [(left_node, left), (right_node, right)]

    def _settle_root(self, view: NodeView, root_info: RootInfo, root, units, cap: int) -> None:
        height = root_info.height
        if len(units) > cap:
            half = (len(units) + 1) // 2
            left, right = self._payload(units[:half]), self._payload(units[half:])
            view.store(root, left)
            sibling = view.create(right)
            new_root = view.create(internal_payload([(root, left), (sibling, right)]))
            view.store(self.anchor, RootInfo(new_root, height + 1))
            logger.debug("root split, height now %d", height + 1)
        elif not isinstance(units, ParenBlock) and len(units) == 1:
            only_child, _ = units[0]
            view.store(self.anchor, RootInfo(only_child, height - 1))
            logger.debug("root collapsed, height now %d", height - 1)
        else:
            view.store(root, self._payload(units))

    # ------------------------------------------------------------------
    # Inspection
    # ------------------------------------------------------------------

    def iter_leaves(self, view: Optional[NodeView] = None) -> Iterator[NodePayload]:
        view = self._view(view)
        pending = [self._root_payload(view)]
        while pending:
            payload = pending.pop()
            if payload.kind is NodeKind.LEAF:
                yield payload
            else:
                pending.extend(view.load(child) for child in reversed(payload.children))

    def to_sequence(self, view: Optional[NodeView] = None) -> bytes:
        return b"".join(leaf.block.symbols() for leaf in self.iter_leaves(view))

    def leaf_path(self, i: int, view: Optional[NodeView] = None) -> List[int]:
        """Cell ids from the root down to the leaf holding position i (or the end, for i = size)."""
        view = self._view(view)
        _, path, leaf, _, _ = self._descend_for_update(view, i, True)
        return [node.cell_id for node, _, _ in path] + [leaf.cell_id]

    def validate(self, view: Optional[NodeView] = None) -> ValidationReport:
        """Check every structural invariant; pure read."""
        view = self._view(view)
        violations: List[Violation] = []
        leaf_depths = set()
        root_info = view.load(self.anchor)

        def report(path, rule, detail):
            violations.append(Violation(path=path, rule=rule, detail=detail))

        def visit(node, path, depth) -> NodeSummary:
            payload = view.load(node)
            is_root = not path
            if payload.kind is NodeKind.LEAF:
                recomputed = summarize_block(payload.block)
                leaf_depths.add(depth)
                if payload.block.length > self.leaf_cap:
                    report(path, "leaf-capacity", f"{payload.block.length} > {self.leaf_cap}")
                if not is_root and payload.block.length < self.min_leaf:
                    report(path, "leaf-occupancy", f"{payload.block.length} < {self.min_leaf}")
            else:
                count = len(payload.children)
                if count > ARITY:
                    report(path, "arity", f"{count} > {ARITY} children")
                if not is_root and count < MIN_CHILDREN:
                    report(path, "internal-occupancy", f"{count} < {MIN_CHILDREN} children")
                if is_root and count < 2:
                    report(path, "root-single-child", f"{count} children")
                recomputed = fold_summaries(
                    visit(child, path + (k,), depth + 1) for k, child in enumerate(payload.children))
            if payload.summary != recomputed:
                report(path, "summary", f"stored {tuple(payload.summary)} != {tuple(recomputed)}")
            try:
                pack_node(payload)
            except (struct.error, OverflowError) as e:
                report(path, "layout", str(e))
            return recomputed

        total = visit(root_info.root, (), 1)
        if len(leaf_depths) > 1:
            report((), "leaf-depth", f"leaves at depths {sorted(leaf_depths)}")
        elif leaf_depths != {root_info.height}:
            report((), "height", f"anchor height {root_info.height}, leaves at {sorted(leaf_depths)}")
        if total.num_parens % 2:
            report((), "even-length", f"{total.num_parens} parentheses")
        if total.num_parens and (total.total_excess != 0 or total.min_excess < 0):
            report((), "balance", f"total excess {total.total_excess}, min excess {total.min_excess}")
        return ValidationReport(violations=violations)
