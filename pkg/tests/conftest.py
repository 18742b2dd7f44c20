import os
import sys

import numpy as np
import pytest

# Add project root to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, os.path.dirname(__file__))

from rmmt.core.ingest import random_balanced
from rmmt.core.rmmt_index import Rmmt

RUN_SLOW = os.getenv('RMMT_RUN_SLOW', '0') == '1'


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-scale acceptance runs (set RMMT_RUN_SLOW=1)")


def pytest_collection_modifyitems(config, items):
    if RUN_SLOW:
        return
    skip = pytest.mark.skip(reason="set RMMT_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_tree():
    """Factory: (tree, flat sequence) for a random tree of ``n_nodes`` nodes."""
    def make(n_nodes: int, seed: int = 0, leaf_cap: int = 320, leaf_fill: float = 0.75):
        seq = random_balanced(n_nodes, seed).seq
        return Rmmt.build(seq, leaf_fill=leaf_fill, leaf_cap=leaf_cap), seq
    return make
