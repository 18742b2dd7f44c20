#!/usr/bin/env python3
"""
Command-line interface for BP conversion: XML, BP text or packed BP in,
BP text or packed BP out.
"""

import sys
import os
import argparse
import logging

from tabulate import tabulate

# Add parent directory to path for imports
sys.path.append(os.path.join(os.path.dirname(__file__), '../..'))

from rmmt.core.config import LOG_LEVEL
from rmmt.core.errors import RmmtError
from rmmt.core.ingest import load_document, random_balanced, write_document, xml_to_bp
from rmmt.core.models import BpFormat
from rmmt.core.rmmt_index import Rmmt


def main(argv=None):
    logging.basicConfig(level=LOG_LEVEL, format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    parser = argparse.ArgumentParser(description='Convert XML or BP files to BP text or packed BP')
    parser.add_argument('source', nargs='?',
                        help="Input file (.xml, .bp/.txt, .bpk); '-' reads XML from standard input")
    parser.add_argument('--random-nodes', type=int, help='Generate a random tree instead of reading a file')
    parser.add_argument('--seed', type=int, default=0, help='Seed for --random-nodes')
    parser.add_argument('--output', '-o', required=True, help='Output file')
    parser.add_argument('--format', '-f', choices=[f.value for f in BpFormat], default=BpFormat.TEXT.value,
                        help='Output format')

    args = parser.parse_args(argv)

    if (args.source is None) == (args.random_nodes is None):
        print("Error: give exactly one of SOURCE or --random-nodes")
        return 1
    if args.source not in (None, '-') and not os.path.exists(args.source):
        print(f"Error: File {args.source} does not exist")
        return 1

    try:
        if args.random_nodes is not None:
            doc = random_balanced(args.random_nodes, args.seed)
        elif args.source == '-':
            doc = xml_to_bp(sys.stdin.buffer)
        else:
            doc = load_document(args.source)
        size = write_document(doc, args.output, BpFormat(args.format))
        tree = Rmmt.build(doc.seq)
    except (RmmtError, OSError) as e:
        print(f"Error: {e}")
        return 1

    print(tabulate([
        ['Source', doc.source],
        ['Nodes', doc.node_count],
        ['Parentheses', len(doc)],
        ['Max depth', tree.root_summary().max_excess],
        ['Output', f"{args.output} ({args.format}, {size} bytes)"],
    ], tablefmt='grid'))
    print("✓ Conversion complete")
    return 0


if __name__ == "__main__":
    sys.exit(main())
