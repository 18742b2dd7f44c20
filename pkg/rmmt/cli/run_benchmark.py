#!/usr/bin/env python3
"""
Command-line interface for the mixed read/write throughput benchmark.

Exit codes: 0 success, 1 configuration error, 2 input error,
3 post-run validation failure.
"""

import sys
import os
import argparse
import logging

# Add parent directory to path for imports
sys.path.append(os.path.join(os.path.dirname(__file__), '../..'))

from rmmt.core.bench import BenchmarkRunner, build_config, emit_csv
from rmmt.core.config import (
    DEFAULT_DURATION,
    DEFAULT_REPS,
    DEFAULT_RETRY_LIMIT,
    DEFAULT_SEED,
    LOG_LEVEL,
)
from rmmt.core.errors import ConfigError, InputError
from rmmt.core.models import ConcurrencyMode, EngineKind

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INPUT = 2
EXIT_INVALID = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(description='Run the concurrent range min-max tree throughput benchmark')
    parser.add_argument('--mode', choices=[k.value for k in EngineKind], required=True,
                        help='Concurrency mode')
    parser.add_argument('--threads', type=int, required=True, help='Number of worker threads')
    parser.add_argument('--duration', type=float, default=DEFAULT_DURATION,
                        help='Seconds per repetition')
    parser.add_argument('--write-pct', type=float, required=True,
                        help='Probability that an iteration is a write, in [0, 1]')
    parser.add_argument('--retries', type=int, choices=[0, 1, 2], default=DEFAULT_RETRY_LIMIT,
                        help='Speculative retries before taking the fallback lock')
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument('--input', help='XML, BP text (.bp/.txt) or packed BP (.bpk) file')
    source.add_argument('--random-nodes', type=int, help='Generate a random tree with N nodes')
    parser.add_argument('--seed', type=int, default=DEFAULT_SEED, help='Base seed')
    parser.add_argument('--reps', type=int, default=DEFAULT_REPS, help='Number of repetitions')
    parser.add_argument('--csv', help='CSV output file (default: standard output)')
    parser.add_argument('--validate', action=argparse.BooleanOptionalAction, default=True,
                        help='Structural check after each repetition')
    parser.add_argument('--backoff', action='store_true',
                        help='Exponential backoff between speculative retries')
    parser.add_argument('--prefer-writers', action='store_true',
                        help='rwlock mode: new readers wait behind queued writers')
    return parser


def main(argv=None):
    logging.basicConfig(level=LOG_LEVEL, format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    try:
        args = build_parser().parse_args(argv)
        cfg = build_config(
            mode=ConcurrencyMode(kind=EngineKind(args.mode), retry_limit=args.retries,
                                 backoff=args.backoff),
            threads=args.threads,
            duration_seconds=args.duration,
            write_pct=args.write_pct,
            input_path=args.input,
            random_nodes=args.random_nodes,
            seed=args.seed,
            repetitions=args.reps,
            validate_after=args.validate,
            prefer_writers=args.prefer_writers,
        )
        if args.input and not os.path.exists(args.input):
            raise InputError(f"File {args.input} does not exist")
        runner = BenchmarkRunner(cfg)
        records, mean = runner.run()
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INPUT

    data = emit_csv(records + [mean])
    if args.csv:
        with open(args.csv, 'wb') as f:
            f.write(data)
        runner.create_summary_table()
        print(f"\nResults saved to {args.csv}")
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()

    if cfg.validate_after and not mean.validated:
        print("✗ Post-run validation failed", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
