#!/usr/bin/env python3
"""
Full benchmark sweep: every thread count, write fraction and retry budget in
both modes, all rows appended to one CSV, followed by a speedup summary
(speculative mean throughput over rwlock mean throughput).
"""

import sys
import argparse
import logging
from pathlib import Path

from tabulate import tabulate

# Add project root to Python path
current_dir = Path(__file__).parent
project_root = current_dir.parent
sys.path.insert(0, str(project_root))

from rmmt.core.bench import BenchmarkRunner, build_config, emit_csv
from rmmt.core.config import (
    DEFAULT_DURATION,
    DEFAULT_REPS,
    DEFAULT_SEED,
    LOG_LEVEL,
    RETRY_SWEEP,
    THREAD_SWEEP,
    WRITE_PCT_SWEEP,
)
from rmmt.core.errors import RmmtError
from rmmt.core.models import ConcurrencyMode, EngineKind


def _csv_list(kind):
    return lambda text: tuple(kind(x) for x in text.split(','))


def main():
    """Main sweep function."""
    logging.basicConfig(level=LOG_LEVEL)

    parser = argparse.ArgumentParser(description='Run the full throughput sweep')
    parser.add_argument('--output', '-o', default='sweep_results.csv', help='CSV output file')
    source = parser.add_mutually_exclusive_group()
    source.add_argument('--input', help='XML, BP text or packed BP file')
    source.add_argument('--random-nodes', type=int, default=None, help='Random tree size')
    parser.add_argument('--threads', type=_csv_list(int), default=THREAD_SWEEP)
    parser.add_argument('--write-pcts', type=_csv_list(float), default=WRITE_PCT_SWEEP)
    parser.add_argument('--retries', type=_csv_list(int), default=RETRY_SWEEP)
    parser.add_argument('--duration', type=float, default=DEFAULT_DURATION)
    parser.add_argument('--reps', type=int, default=DEFAULT_REPS)
    parser.add_argument('--seed', type=int, default=DEFAULT_SEED)
    args = parser.parse_args()
    if args.input is None and args.random_nodes is None:
        args.random_nodes = 100_000

    modes = [ConcurrencyMode(kind=EngineKind.GLOBAL_RWLOCK)]
    modes += [ConcurrencyMode(kind=EngineKind.SPECULATIVE_FALLBACK, retry_limit=r) for r in args.retries]
    runs = len(modes) * len(args.threads) * len(args.write_pcts)

    print("🚀 Starting RMMT throughput sweep...")
    print("=" * 50)
    print(f"📍 {runs} configurations x {args.reps} reps x {args.duration}s")
    print(f"📄 Writing to {args.output}")

    means = {}
    output = Path(args.output)
    output.write_bytes(emit_csv([]))
    done = 0
    try:
        for write_pct in args.write_pcts:
            for threads in args.threads:
                for mode in modes:
                    cfg = build_config(mode=mode, threads=threads, duration_seconds=args.duration,
                                       write_pct=write_pct, input_path=args.input,
                                       random_nodes=args.random_nodes, seed=args.seed,
                                       repetitions=args.reps)
                    records, mean = BenchmarkRunner(cfg).run()
                    with output.open('ab') as f:
                        f.write(emit_csv(records + [mean], header=False))
                    means[(mode.kind, mode.retry_limit, threads, write_pct)] = mean
                    done += 1
                    print(f"  [{done}/{runs}] {mode.kind.value} r={mode.retry_limit} "
                          f"t={threads} w={write_pct:.0%}: {mean.throughput:,.0f} ops/s")
    except KeyboardInterrupt:
        print("\n👋 Sweep interrupted, partial results kept")
    except RmmtError as e:
        print(f"❌ Error: {e}")
        return 1

    rows = []
    for (kind, retries, threads, write_pct), mean in sorted(means.items(), key=lambda kv: kv[0][1:]):
        base = means.get((EngineKind.GLOBAL_RWLOCK, modes[0].retry_limit, threads, write_pct))
        if kind is not EngineKind.SPECULATIVE_FALLBACK or base is None or not base.throughput:
            continue
        rows.append([f"{write_pct:.0%}", threads, retries, f"{base.throughput:,.0f}",
                     f"{mean.throughput:,.0f}", f"{mean.throughput / base.throughput:.2f}x"])

    if rows:
        print(tabulate(rows, headers=['Writes', 'Threads', 'Retries', 'RW lock ops/s',
                                      'Speculative ops/s', 'Speedup'], tablefmt='grid'))
    print(f"\n✅ Results saved to {output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
