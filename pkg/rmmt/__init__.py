"""
RMMT Bench - Concurrent Dynamic Range Min-Max Tree

A Python library and benchmark driver for a dynamic range min-max tree over
balanced parentheses, with a global reader-writer lock mode and a speculative
transaction mode that falls back to a global lock.
"""

__version__ = "1.0.0"
__author__ = "RMMT Bench Team"
__description__ = "Concurrent Dynamic Range Min-Max Tree & Throughput Benchmark"
