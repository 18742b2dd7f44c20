"""
Runs tree operations under one of two modes:

- GLOBAL_RWLOCK: one structure-wide reader-writer lock, writers exclusive.
- SPECULATIVE_FALLBACK: each operation runs as a software transaction that
  records the version of every node it reads and buffers every node it writes.
  Commit validates the read set and publishes all writes with one new version.
  After ``retry_limit`` retries the operation takes the global fallback lock
  and runs irrevocably. Speculative attempts abort as soon as they observe the
  fallback lock held.

Conflicts are detected per node (one node per 64-byte line in the tree
layout). ``SpeculativeView`` is the only speculation backend here; a hardware
backend would replace it through ``ConcurrencyEngine.view_factory``.
"""

import logging
import random
import threading
import time
from typing import Any, Callable, Dict, List, Optional, Tuple

from .config import SWEEP_MAX_RETRIES
from .errors import RmmtError
from .models import ConcurrencyMode, EngineKind, TxnStats
from .rmmt_index import NodeView, Rmmt, VersionedCell
from .rwlock import ReadWriteLock

logger = logging.getLogger(__name__)

Request = Callable[[Rmmt, NodeView], Any]

READ_OPS = frozenset({
    "access", "excess", "fwd_search", "bwd_search", "find_close", "find_open",
    "enclose", "depth", "subtree_size", "range_min", "total_size",
})
WRITE_OPS = frozenset({"insert_pair", "insert_leaf", "delete_pair"})

BACKOFF_BASE = 1e-6
BACKOFF_CAP = 1e-3


def op(name: str, *args) -> Request:
    """Build a request that calls one tree operation, e.g. ``op("find_close", 0)``."""
    if name not in READ_OPS and name not in WRITE_OPS:
        raise ValueError(f"unknown operation: {name}")

    def request(tree: Rmmt, view: NodeView):
        return getattr(tree, name)(*args, view=view)

    request.op_name = name
    return request


class TxnAbort(Exception):
    """A speculative attempt lost a conflict and must be retried."""


class SpeculativeView(NodeView):
    """Read-set/write-buffer view of one speculative attempt."""

    def __init__(self, engine: "ConcurrencyEngine"):
        super().__init__(engine.tree, journal=[] if engine.journal is not None else None)
        self.engine = engine
        self.read_version = engine.tree.clock
        self.reads: Dict[VersionedCell, int] = {}
        self.writes: Dict[VersionedCell, Any] = {}

    def load(self, cell: VersionedCell):
        if cell in self.writes:
            return self.writes[cell]
        if self.engine.fallback_active:
            raise TxnAbort("fallback lock held")
        version, value = cell.state
        if version > self.read_version:
            raise TxnAbort(f"cell {cell.cell_id} changed after the attempt started")
        self.reads[cell] = version
        return value

    def store(self, cell: VersionedCell, value) -> None:
        self.writes[cell] = value

    def create(self, payload) -> VersionedCell:
        node = VersionedCell(self.tree.next_node_id(), payload)
        self.writes[node] = payload
        return node


class IrrevocableView(SpeculativeView):
    """Fallback execution: the fallback lock excludes every other commit, so reads are unchecked."""

    def load(self, cell: VersionedCell):
        if cell in self.writes:
            return self.writes[cell]
        return cell.state[1]


class _Counters:
    def __init__(self):
        self._lock = threading.Lock()
        self._values = dict.fromkeys(TxnStats.model_fields, 0)

    def record(self, attempts: int, aborts: int, fast: bool, fallback: bool, write: bool) -> None:
        with self._lock:
            v = self._values
            v["attempts"] += attempts
            v["aborts"] += aborts
            v["fast_commits"] += fast
            v["fallback_commits"] += fallback
            if fast or fallback:
                v["writes_done" if write else "reads_done"] += 1
            v["max_attempts"] = max(v["max_attempts"], attempts)

    def snapshot(self) -> TxnStats:
        with self._lock:
            return TxnStats(**self._values)


class ConcurrencyEngine:
    """
    The concurrency boundary around one Rmmt. All public methods are safe to
    call from any number of threads.
    """

    view_factory = SpeculativeView

    def __init__(self, tree: Rmmt, mode: ConcurrencyMode,
                 conflict_hook: Optional[Callable[[], bool]] = None,
                 prefer_writers: bool = False, journal: bool = False):
        self.tree = tree
        self.mode = mode
        self.conflict_hook = conflict_hook
        self.journal: Optional[List[Tuple[str, tuple]]] = [] if journal else None
        self.fallback_active = False
        self._rwlock = ReadWriteLock(prefer_writers=prefer_writers)
        self._commit_lock = threading.Lock()
        self._fallback_lock = threading.Lock()
        self._counters = _Counters()
        if mode.kind is EngineKind.SPECULATIVE_FALLBACK and mode.retry_limit > SWEEP_MAX_RETRIES:
            logger.warning("retry_limit %d is outside the 0..%d range of the reference experiment",
                           mode.retry_limit, SWEEP_MAX_RETRIES)

    def execute_read(self, request: Request):
        if getattr(request, "op_name", None) in WRITE_OPS:
            raise ValueError(f"{request.op_name} is a write operation")
        return self._execute(request, write=False)

    def execute_write(self, request: Request):
        return self._execute(request, write=True)

    def snapshot_stats(self) -> TxnStats:
        return self._counters.snapshot()

    def _execute(self, request: Request, write: bool):
        if self.mode.kind is EngineKind.GLOBAL_RWLOCK:
            return self._run_locked(request, write)
        return self._run_speculative(request, write)

    # ------------------------------------------------------------------
    # Reader-writer lock mode
    # ------------------------------------------------------------------

    def _run_locked(self, request: Request, write: bool):
        committed = False
        try:
            if write:
                with self._rwlock.write_locked():
                    view = NodeView(self.tree, journal=self.journal)
                    result = request(self.tree, view)
            else:
                with self._rwlock.read_locked():
                    result = request(self.tree, self.tree.direct)
            committed = True
            return result
        finally:
            self._counters.record(1, 0, committed, False, write)

    # ------------------------------------------------------------------
    # Speculative mode
    # ------------------------------------------------------------------

    def _run_speculative(self, request: Request, write: bool):
        attempts = aborts = 0
        while attempts <= self.mode.retry_limit:
            attempts += 1
            view = self.view_factory(self)
            try:
                result = request(self.tree, view)
                self._commit(view, write)
            except TxnAbort as e:
                aborts += 1
                logger.debug("attempt %d aborted: %s", attempts, e)
                self._backoff(attempts)
                continue
            except RmmtError:
                # Every read was checked against the start version, so the
                # failure is a real precondition failure of a consistent snapshot
                self._counters.record(attempts, aborts, False, False, write)
                raise
            except Exception as e:
                # Faults inside a speculative attempt abort it, like hardware transactions
                aborts += 1
                logger.debug("attempt %d faulted: %r", attempts, e)
                continue
            self._counters.record(attempts, aborts, True, False, write)
            return result

        logger.debug("operation took the fallback path after %d aborts", aborts)
        try:
            result = self._run_fallback(request)
        except Exception:
            self._counters.record(attempts, aborts, False, False, write)
            raise
        self._counters.record(attempts, aborts, False, True, write)
        return result

    def _commit(self, view: SpeculativeView, write: bool) -> None:
        with self._commit_lock:
            if self.fallback_active:
                raise TxnAbort("fallback lock held at commit")
            if self.conflict_hook is not None and self.conflict_hook():
                raise TxnAbort("injected conflict")
            if not view.writes:
                return
            for cell, version in view.reads.items():
                if cell.state[0] != version:
                    raise TxnAbort(f"cell {cell.cell_id} changed before commit")
            self._publish(view)

    def _publish(self, view: SpeculativeView) -> None:
        if view.writes:
            version = self.tree.clock + 1
            for cell, value in view.writes.items():
                cell.state = (version, value)
            self.tree.clock = version
        if self.journal is not None:
            self.journal.extend(view.journal)

    def _run_fallback(self, request: Request):
        with self._fallback_lock:
            with self._commit_lock:
                self.fallback_active = True
            try:
                view = IrrevocableView(self)
                result = request(self.tree, view)
                with self._commit_lock:
                    self._publish(view)
                return result
            finally:
                with self._commit_lock:
                    self.fallback_active = False

    def _backoff(self, attempt: int) -> None:
        if self.mode.backoff:
            time.sleep(random.uniform(0, min(BACKOFF_CAP, BACKOFF_BASE * 2 ** attempt)))
