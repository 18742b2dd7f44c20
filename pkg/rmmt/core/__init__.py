"""
Core RMMT Modules

This package contains the data structure and its drivers:
- bp_kernel: bit-packed parenthesis blocks, summaries and in-block searches
- rmmt_index: the dynamic range min-max tree
- concurrency_engine: reader-writer lock and speculative execution modes
- ingest: XML / BP text / packed BP input and random tree generation
- bench: mixed read/write throughput benchmark and CSV output
- config: environment-driven defaults
"""

from .bp_kernel import NodeSummary, ParenBlock, combine, fwd_search_block, bwd_search_block
from .rmmt_index import Rmmt, NodeView, pack_node
from .concurrency_engine import ConcurrencyEngine, op
from .ingest import xml_to_bp, iter_xml_symbols, parse_bp_text, parse_bp_packed, serialize_bp, random_balanced
from .bench import BenchmarkRunner, run_benchmark, emit_csv
from .models import BenchConfig, BenchRecord, BpDocument, BpFormat, ConcurrencyMode, EngineKind

__all__ = [
    'NodeSummary',
    'ParenBlock',
    'combine',
    'fwd_search_block',
    'bwd_search_block',
    'Rmmt',
    'NodeView',
    'pack_node',
    'ConcurrencyEngine',
    'op',
    'xml_to_bp',
    'iter_xml_symbols',
    'parse_bp_text',
    'parse_bp_packed',
    'serialize_bp',
    'random_balanced',
    'BenchmarkRunner',
    'run_benchmark',
    'emit_csv',
    'BenchConfig',
    'BenchRecord',
    'BpDocument',
    'BpFormat',
    'ConcurrencyMode',
    'EngineKind',
]
