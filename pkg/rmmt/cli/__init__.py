"""
Command Line Interface Module

Entry points: run_benchmark (timed workload, CSV output) and convert_bp
(XML / BP text / packed BP conversion).
"""
