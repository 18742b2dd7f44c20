#!/usr/bin/env python3
"""
Mixed read/write workload over one shared tree.

Each worker loops until the deadline: with probability ``write_pct`` it runs a
structural update, otherwise a navigation query, then a short private
non-critical section. Positions are drawn as uniform fractions and resolved
inside the operation, so every request is valid against whatever tree it
runs on and a worker's request stream depends only on its seed.
"""

import csv
import io
import logging
import math
import threading
import time
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError
from tabulate import tabulate

from .bp_kernel import OPEN
from .concurrency_engine import ConcurrencyEngine
from .config import NON_CRITICAL_FRACTION, PRIVATE_VECTOR_LEN
from .errors import ConfigError, InputError, RmmtError
from .ingest import load_document, random_balanced
from .models import BenchConfig, BenchRecord, BpDocument
from .rmmt_index import Rmmt

logger = logging.getLogger(__name__)

READER_KINDS = ("find_close", "enclose", "depth")

# Rejection-sampling draws per delete request
DELETE_DRAWS = 32

CSV_HEADER = (
    "mode", "threads", "duration_s", "write_pct", "retries", "rep",
    "ops_total", "ops_read", "ops_write", "fast_commits", "fallback_commits",
    "aborts", "throughput_ops_s",
)

# Private-vector passes timed when sizing the non-critical quantum
_CALIBRATION_PASSES = 200
_QUANTUM_SECONDS = 20e-6


def build_config(**fields) -> BenchConfig:
    """BenchConfig from keyword fields, with validation failures raised as ConfigError."""
    try:
        return BenchConfig(**fields)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


# ----------------------------------------------------------------------
# Requests
# ----------------------------------------------------------------------

def _open_at(tree: Rmmt, view, pos: int) -> int:
    return pos if tree.access(pos, view) == OPEN else tree.find_open(pos, view)


def reader_request(kind: str, u: float) -> Callable:
    """Navigation query ``kind`` at the open nearest position ``u * size``."""

    def request(tree: Rmmt, view):
        n = tree.total_size(view)
        if not n:
            return None
        pos = _open_at(tree, view, min(int(u * n), n - 1))
        return getattr(tree, kind)(pos, view=view)

    request.op_name = kind
    return request


def insert_request(u: float) -> Callable:
    """New leaf at position ``u * (size + 1)``."""

    def request(tree: Rmmt, view):
        pos = min(int(u * (tree.total_size(view) + 1)), tree.total_size(view))
        tree.insert_leaf(pos, view=view)
        return pos

    request.op_name = "insert_leaf"
    return request


def delete_request(draws: Sequence[float]) -> Callable:
    """
    Delete a uniformly random leaf pair. Each draw maps to a position ``p``
    in ``[0, size - 1)``; the first ``p`` holding ``()`` is deleted, so every
    leaf pair is equally likely. If all draws miss, the leftmost leaf under the
    node at the first draw is deleted. An empty tree gets a leaf inserted instead.
    """
    draws = tuple(draws)

    def request(tree: Rmmt, view):
        n = tree.total_size(view)
        if not n:
            tree.insert_leaf(0, view=view)
            return None
        for u in draws:
            pos = min(int(u * (n - 1)), n - 2)
            if tree.access(pos, view) == OPEN and tree.access(pos + 1, view) != OPEN:
                tree.delete_pair(pos, view=view)
                return pos
        pos = _open_at(tree, view, min(int(draws[0] * n), n - 1))
        while tree.access(pos + 1, view) == OPEN:
            pos += 1
        tree.delete_pair(pos, view=view)
        return pos

    request.op_name = "delete_pair"
    return request


# ----------------------------------------------------------------------
# Workers
# ----------------------------------------------------------------------

def calibrate_quantum(vector_len: int = PRIVATE_VECTOR_LEN) -> int:
    """Number of private-vector passes that take roughly _QUANTUM_SECONDS."""
    vec = np.zeros(vector_len, dtype=np.int64)
    start = time.perf_counter()
    for k in range(_CALIBRATION_PASSES):
        _mutate(vec, k)
    per_pass = (time.perf_counter() - start) / _CALIBRATION_PASSES
    return max(1, int(_QUANTUM_SECONDS / per_pass)) if per_pass > 0 else 1


def _mutate(vec: np.ndarray, salt: int) -> None:
    np.add(vec, salt & 7, out=vec)
    vec[salt % vec.size] ^= 1


class BenchWorker:
    """One workload thread. Its request stream is fixed by ``seed + index``."""

    def __init__(self, index: int, engine: ConcurrencyEngine, write_pct: float, seed: int,
                 quantum: int = 1, non_critical_fraction: float = NON_CRITICAL_FRACTION):
        self.index = index
        self.engine = engine
        self.write_pct = write_pct
        self.rng = np.random.default_rng(seed + index)
        self.private = np.zeros(PRIVATE_VECTOR_LEN, dtype=np.int64)
        self.quantum = quantum
        self.non_critical_fraction = non_critical_fraction
        self.iterations = 0
        self.non_critical_seconds = 0.0
        self.error: Optional[BaseException] = None

    def next_request(self) -> Tuple[Callable, bool]:
        """Draw the next (request, is_write) pair."""
        if self.rng.random() < self.write_pct:
            if self.rng.random() < 0.5:
                return insert_request(float(self.rng.random())), True
            return delete_request(self.rng.random(DELETE_DRAWS).tolist()), True
        kind = READER_KINDS[int(self.rng.integers(len(READER_KINDS)))]
        return reader_request(kind, float(self.rng.random())), False

    def run_iteration(self, elapsed: float) -> None:
        request, is_write = self.next_request()
        if is_write:
            self.engine.execute_write(request)
        else:
            self.engine.execute_read(request)
        self.iterations += 1
        self._non_critical(elapsed)

    def _non_critical(self, elapsed: float) -> None:
        # Keeps cumulative private work near the configured share of wall time
        if self.non_critical_seconds >= self.non_critical_fraction * elapsed:
            return
        start = time.perf_counter()
        for k in range(self.quantum):
            _mutate(self.private, self.iterations + k)
        self.non_critical_seconds += time.perf_counter() - start

    def run(self, barrier: threading.Barrier, clock: dict) -> None:
        try:
            barrier.wait()
            start, deadline = clock["start"], clock["deadline"]
            now = time.perf_counter()
            while now < deadline:
                self.run_iteration(now - start)
                now = time.perf_counter()
        except BaseException as e:  # surfaced by the runner after join
            self.error = e


# ----------------------------------------------------------------------
# Runner
# ----------------------------------------------------------------------

class BenchmarkRunner:
    def __init__(self, cfg: BenchConfig, conflict_hook=None):
        self.cfg = cfg
        self.conflict_hook = conflict_hook
        self.results: List[BenchRecord] = []
        self.document = self._load_input()

    def _load_input(self) -> BpDocument:
        cfg = self.cfg
        if cfg.random_nodes is not None:
            return random_balanced(cfg.random_nodes, cfg.seed)
        try:
            return load_document(cfg.input_path)
        except (OSError, RmmtError) as e:
            raise InputError(f"cannot load {cfg.input_path}: {e}") from e

    def build_tree(self) -> Rmmt:
        try:
            return Rmmt.build(self.document.seq, leaf_fill=self.cfg.leaf_fill)
        except RmmtError as e:
            raise InputError(f"{self.document.source}: {e}") from e

    def run_repetition(self, rep: int, quantum: int) -> BenchRecord:
        cfg = self.cfg
        tree = self.build_tree()
        engine = ConcurrencyEngine(tree, cfg.mode, conflict_hook=self.conflict_hook,
                                   prefer_writers=cfg.prefer_writers)
        workers = [BenchWorker(k, engine, cfg.write_pct, cfg.seed + rep * cfg.threads, quantum)
                   for k in range(cfg.threads)]
        clock = {}

        def start_clock():
            clock["start"] = time.perf_counter()
            clock["deadline"] = clock["start"] + cfg.duration_seconds

        barrier = threading.Barrier(cfg.threads, action=start_clock)
        threads = [threading.Thread(target=w.run, args=(barrier, clock), name=f"bench-{w.index}")
                   for w in workers]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        wall = max(time.perf_counter() - clock["start"], 1e-9)

        for w in workers:
            if w.error is not None:
                raise w.error

        validated = None
        if cfg.validate_after:
            report = tree.validate()
            validated = report.ok
            for v in report.violations[:10]:
                logger.error("rep %d: %s at %s: %s", rep, v.rule, v.path, v.detail)

        stats = engine.snapshot_stats()
        ops_total = stats.reads_done + stats.writes_done
        record = BenchRecord(
            mode=cfg.mode.kind,
            threads=cfg.threads,
            duration_s=cfg.duration_seconds,
            write_pct=cfg.write_pct,
            retries=cfg.retry_limit,
            input=cfg.input_label,
            seed=cfg.seed,
            repetitions=cfg.repetitions,
            leaf_fill=cfg.leaf_fill,
            rep=rep,
            ops_total=ops_total,
            ops_read=stats.reads_done,
            ops_write=stats.writes_done,
            fast_commits=stats.fast_commits,
            fallback_commits=stats.fallback_commits,
            aborts=stats.aborts,
            throughput=ops_total / wall,
            wall_seconds=wall,
            validated=validated,
        )
        logger.info("rep %d: %d ops in %.3fs (%.0f ops/s), %d aborts, %d fallbacks",
                    rep, ops_total, wall, record.throughput, stats.aborts, stats.fallback_commits)
        return record

    def run(self) -> Tuple[List[BenchRecord], BenchRecord]:
        cfg = self.cfg
        logger.info("Benchmark: mode=%s retries=%d threads=%d write_pct=%.2f duration=%.1fs reps=%d",
                    cfg.mode.kind.value, cfg.retry_limit, cfg.threads, cfg.write_pct,
                    cfg.duration_seconds, cfg.repetitions)
        quantum = calibrate_quantum()
        self.results = [self.run_repetition(rep, quantum) for rep in range(cfg.repetitions)]
        return self.results, mean_record(self.results)

    def create_summary_table(self) -> None:
        if not self.results:
            print("No results to display")
            return
        print(f"\n{'='*80}")
        print(f"BENCHMARK: {self.cfg.mode.kind.value} (retries={self.cfg.retry_limit}), "
              f"{self.cfg.threads} threads, {self.cfg.write_pct:.0%} writes")
        print(f"{'='*80}")
        rows = [_summary_row(r) for r in self.results + [mean_record(self.results)]]
        print(tabulate(rows, headers=['Rep', 'Ops', 'Reads', 'Writes', 'Fast', 'Fallback',
                                      'Aborts', 'Ops/s', 'Valid'], tablefmt='grid'))


def _summary_row(r: BenchRecord) -> list:
    valid = '-' if r.validated is None else ('✓' if r.validated else '✗')
    return [r.rep, f"{r.ops_total:.0f}", f"{r.ops_read:.0f}", f"{r.ops_write:.0f}",
            f"{r.fast_commits:.0f}", f"{r.fallback_commits:.0f}", f"{r.aborts:.0f}",
            f"{r.throughput:,.0f}", valid]


def mean_record(records: List[BenchRecord]) -> BenchRecord:
    """Mean over repetitions; throughput is the mean of per-repetition throughputs."""
    if not records:
        raise ValueError("no records to average")
    first = records[0]

    def mean(field: str) -> float:
        return float(np.mean([getattr(r, field) for r in records]))

    flags = [r.validated for r in records]
    return BenchRecord(
        mode=first.mode,
        threads=first.threads,
        duration_s=first.duration_s,
        write_pct=first.write_pct,
        retries=first.retries,
        input=first.input,
        seed=first.seed,
        repetitions=first.repetitions,
        leaf_fill=first.leaf_fill,
        rep="mean",
        ops_total=mean("ops_total"),
        ops_read=mean("ops_read"),
        ops_write=mean("ops_write"),
        fast_commits=mean("fast_commits"),
        fallback_commits=mean("fallback_commits"),
        aborts=mean("aborts"),
        throughput=mean("throughput"),
        wall_seconds=mean("wall_seconds"),
        validated=None if None in flags else all(flags),
    )


def run_benchmark(cfg: BenchConfig) -> Tuple[List[BenchRecord], BenchRecord]:
    """Run ``cfg.repetitions`` timed repetitions; returns the per-repetition records and their mean."""
    return BenchmarkRunner(cfg).run()


# ----------------------------------------------------------------------
# CSV
# ----------------------------------------------------------------------

def _format_number(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, int) or float(value).is_integer():
        return str(int(value))
    text = f"{value:.6f}".rstrip("0").rstrip(".")
    return text if text not in ("", "-0") else "0"


def csv_row(record: BenchRecord) -> list:
    return [
        record.mode.value, record.threads, record.duration_s, record.write_pct, record.retries,
        record.rep, record.ops_total, record.ops_read, record.ops_write, record.fast_commits,
        record.fallback_commits, record.aborts, record.throughput,
    ]


def emit_csv(records: List[BenchRecord], header: bool = True) -> bytes:
    """CSV bytes for ``records``. Every record must pass its accounting check."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    if header:
        writer.writerow(CSV_HEADER)
    for record in records:
        record.check_accounting()
        writer.writerow([_format_number(v) for v in csv_row(record)])
    return out.getvalue().encode("ascii")


def binomial_band(n: int, p: float, sigmas: float = 3.0) -> Tuple[float, float]:
    """Interval of a proportion within ``sigmas`` standard deviations of Binomial(n, p) / n."""
    sd = math.sqrt(p * (1 - p) / n) if n else 0.0
    return p - sigmas * sd, p + sigmas * sd
