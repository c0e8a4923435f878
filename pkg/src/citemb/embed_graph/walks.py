"""Random walks with restart and node2vec second-order bias."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange

from ..corpus import CitationGraph
from . import _rng


@dataclass
class WalkConfig:
    p: float = 1.0
    q: float = 1.0
    walk_length: int = 80
    walks_per_node: int = 10
    window: int = 10
    restart_prob: float = 0.01
    seed: int = 0

    def validate(self) -> None:
        if self.p <= 0 or self.q <= 0:
            raise ValueError("p and q must be positive")
        if self.walk_length < 2:
            raise ValueError("walk_length must be >= 2")
        if self.walks_per_node < 1:
            raise ValueError("walks_per_node must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if not 0.0 <= self.restart_prob < 1.0:
            raise ValueError("restart_prob must lie in [0, 1)")


@dataclass(frozen=True)
class WalkCorpus:
    """Walks as an (n_walks, walk_length) array of node indices into ``ids``.

    ``window`` is the skip-gram context half-width the walks were generated for.
    """

    walks: np.ndarray
    ids: tuple
    window: int = 10

    @property
    def n_nodes(self) -> int:
        return len(self.ids)

    def node_counts(self) -> np.ndarray:
        return np.bincount(self.walks.ravel(), minlength=self.n_nodes)


@njit(inline="always")
def _is_neighbor(indptr, indices, a, b):
    lo = indptr[a]
    hi = indptr[a + 1]
    k = np.searchsorted(indices[lo:hi], b)
    return k < hi - lo and indices[lo + k] == b


@njit(inline="always")
def _next_step(indptr, indices, prev, cur, inv_p, inv_q, biased, state):
    lo = indptr[cur]
    deg = indptr[cur + 1] - lo
    if not biased or prev < 0:
        state, r = _rng.randint(state, deg)
        return state, indices[lo + r]
    # rejection sampling against the largest of the three bias weights
    wmax = max(inv_p, 1.0, inv_q)
    while True:
        state, r = _rng.randint(state, deg)
        nxt = indices[lo + r]
        if nxt == prev:
            w = inv_p
        elif _is_neighbor(indptr, indices, nxt, prev):
            w = 1.0
        else:
            w = inv_q
        state, u = _rng.uniform(state)
        if u * wmax < w:
            return state, nxt


@njit(inline="always")
def _walk_one(indptr, indices, start, length, restart, inv_p, inv_q, biased, state, out):
    out[0] = start
    cur = start
    prev = -1
    for t in range(1, length):
        state, u = _rng.uniform(state)
        if u < restart:
            prev = -1
            cur = start
        else:
            state, nxt = _next_step(indptr, indices, prev, cur, inv_p, inv_q, biased, state)
            prev = cur
            cur = nxt
        out[t] = cur
    return state


@njit(parallel=True, cache=True)
def _walks_kernel(indptr, indices, starts, length, restart, inv_p, inv_q, biased, seed, out):
    for w in prange(starts.shape[0]):
        state = _rng.stream(seed, w)
        _walk_one(indptr, indices, starts[w], length, restart, inv_p, inv_q, biased, state, out[w])


def generate_walks(g: CitationGraph, cfg: WalkConfig, workers: int = 1) -> WalkCorpus:
    """``walks_per_node`` walks from every node with degree >= 1.

    Each step restarts at the walk's start node with probability
    ``restart_prob``; otherwise it moves to a neighbour with the node2vec
    (p, q) bias, which reduces to a uniform choice when p = q = 1.  Every walk
    draws from its own counter-based stream, so the corpus depends only on
    ``cfg.seed`` and not on ``workers``.  Zero-degree nodes get no walks.
    """
    cfg.validate()
    adj = g.adjacency
    indptr = adj.indptr.astype(np.int64)
    indices = adj.indices.astype(np.int64)
    active = np.nonzero(g.degree > 0)[0].astype(np.int64)
    starts = np.tile(active, cfg.walks_per_node)
    out = np.empty((starts.size, cfg.walk_length), dtype=np.int64)
    biased = not (cfg.p == 1.0 and cfg.q == 1.0)
    prev_threads = numba.get_num_threads()
    numba.set_num_threads(max(1, min(workers, numba.config.NUMBA_NUM_THREADS)))
    try:
        _walks_kernel(indptr, indices, starts, cfg.walk_length, cfg.restart_prob,
                      1.0 / cfg.p, 1.0 / cfg.q, biased, np.uint64(cfg.seed), out)
    finally:
        numba.set_num_threads(prev_threads)
    return WalkCorpus(out, g.ids, cfg.window)


def transition_probs(g: CitationGraph, prev: int, cur: int, p: float, q: float) -> tuple:
    """Exact (neighbours, probabilities) of the biased step cur -> x given prev (-1 for none)."""
    nbrs = g.neighbors(cur)
    if prev < 0:
        w = np.ones(len(nbrs))
    else:
        w = np.array([1.0 / p if x == prev else (1.0 if g.has_edge(x, prev) else 1.0 / q)
                      for x in nbrs])
    return nbrs, w / w.sum()


def step_sample(g: CitationGraph, prev: int, cur: int, p: float, q: float, n_steps: int,
                seed: int = 0, biased: bool = True) -> np.ndarray:
    """Draw ``n_steps`` independent single steps cur -> x (restart disabled), via the walk kernel."""
    adj = g.adjacency
    indptr = adj.indptr.astype(np.int64)
    indices = adj.indices.astype(np.int64)
    return _step_kernel(indptr, indices, prev, cur, 1.0 / p, 1.0 / q, biased,
                        np.uint64(seed), n_steps)


@njit(cache=True)
def _step_kernel(indptr, indices, prev, cur, inv_p, inv_q, biased, seed, n_steps):
    res = np.empty(n_steps, dtype=np.int64)
    for s in range(n_steps):
        state = _rng.stream(seed, s)
        state, nxt = _next_step(indptr, indices, prev, cur, inv_p, inv_q, biased, state)
        res[s] = nxt
    return res
