""" Shared fixtures: small hosts, a sample built from explicit edge ids, networkx views of samples """

from fractions import Fraction

import networkx as nx
import numpy as np
import pytest

from perclab.graphs import complete, cycle, hypercube
from perclab.percolation import PercolatedSample


@pytest.fixture
def q3():
    return hypercube(3)


@pytest.fixture
def q6():
    return hypercube(6)


@pytest.fixture
def q10():
    return hypercube(10)


@pytest.fixture
def k4():
    return complete(4)


@pytest.fixture
def c5():
    return cycle(5)


@pytest.fixture
def make_sample():
    """ Factory for a sample whose kept set is exactly the given edge ids """

    def _make(host, ids, *, p=Fraction(1), seed=0):
        mask = np.zeros(host.m, dtype=bool)
        mask[list(ids)] = True
        return PercolatedSample(host, p, seed, np.packbits(mask, bitorder='little'))

    return _make


@pytest.fixture
def to_networkx():
    """ networkx graph on all host vertices with the kept edges of a sample """

    def _convert(s):
        g = nx.Graph()
        g.add_nodes_from(range(s.n))
        lo, hi = s.host.edge_arrays(s.kept_ids)
        g.add_edges_from(zip(lo.tolist(), hi.tolist()))
        return g

    return _convert
