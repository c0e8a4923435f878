import sys
import warnings

import numpy as np
import pytest

from citemb.corpus import CitationGraph, NodeMeta, parse_code

# numba complains about the system TBB version on import; irrelevant here
warnings.filterwarnings("ignore", message=".*TBB.*")


def make_graph(n, edges, codes=None, years=None, width=None):
    """Graph on ids n0..n{n-1} (zero-padded so lexicographic == numeric order)."""
    width = width or len(str(max(n - 1, 0)))
    meta = []
    for i in range(n):
        c = () if codes is None or codes[i] is None else tuple(
            parse_code(x) for x in ([codes[i]] if isinstance(codes[i], str) else codes[i]))
        meta.append(NodeMeta(f"n{i:0{width}d}", None if years is None else years[i], c))
    return CitationGraph.build(meta, np.array(edges, dtype=np.int64).reshape(-1, 2))


def random_connected_graph(rng, n, extra_p):
    """Random spanning tree plus Bernoulli(extra_p) extra edges."""
    edges = [(i, int(rng.integers(i))) for i in range(1, n)]
    iu, ju = np.triu_indices(n, 1)
    hit = rng.random(iu.size) < extra_p
    edges += list(zip(iu[hit].tolist(), ju[hit].tolist()))
    return make_graph(n, edges)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
