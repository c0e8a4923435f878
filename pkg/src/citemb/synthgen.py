"""Hierarchical stochastic block model graphs with planted PACS-like codes.

Code injection for a block path (b1, b2, b3, b4):

    depth 1  -> first digit b1          ("b1" + "0" at L1)
    depth 2  -> second digit b2
    depth 3  -> "b3" + "0" after the first dot
    depth 4  -> "A" + lowercase letter number b4

so (2, 3, 1) becomes "23.10.Aa".  Levels missing from ``branching`` are
filled with block 0, and branching factors are capped at 10, 10, 10, 26.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .corpus import CitationGraph, NodeMeta, parse_code

_MAX_BRANCH = (10, 10, 10, 26)
_ROW_CHUNK = 256


@dataclass
class HierSBMConfig:
    """Hierarchical SBM parameters.

    ``level_probs`` is ordered background -> deepest: ``level_probs[0]`` is the
    probability for pairs in different depth-1 blocks and ``level_probs[k]``
    for pairs whose deepest common block is at depth k.
    """

    n_nodes: int = 1000
    branching: list = field(default_factory=lambda: [4, 4, 4])
    level_probs: list = field(default_factory=lambda: [0.002, 0.02, 0.1, 0.5])
    seed: int = 0
    year_range: tuple = (2001, 2010)
    # power-law expected-degree weights; None gives plain Bernoulli pairs
    degree_exponent: Optional[float] = None
    # extra edge probability multiplier for pairs touching a latest-year node
    latest_year_boost: float = 0.5

    def validate(self) -> None:
        if not 1 <= len(self.branching) <= 4:
            raise ValueError("branching must have 1..4 levels")
        for b, cap in zip(self.branching, _MAX_BRANCH):
            if not 1 <= b <= cap:
                raise ValueError(f"branching factor {b} outside 1..{cap}")
        if int(np.prod(self.branching)) > self.n_nodes:
            raise ValueError("product of branching exceeds n_nodes")
        p = list(self.level_probs)
        if len(p) != len(self.branching) + 1:
            raise ValueError("level_probs needs len(branching) + 1 entries (background first)")
        if any(not 0.0 <= x <= 1.0 for x in p):
            raise ValueError("probabilities must lie in [0, 1]")
        if any(a >= b for a, b in zip(p, p[1:])):
            raise ValueError("level_probs must strictly increase from background to deepest")
        lo, hi = self.year_range
        if lo > hi:
            raise ValueError("year_range must be (min, max)")
        if self.degree_exponent is not None and self.degree_exponent <= 1.0:
            raise ValueError("degree_exponent must exceed 1")
        if self.latest_year_boost < 0:
            raise ValueError("latest_year_boost must be nonnegative")

    @classmethod
    def from_json(cls, text: str) -> "HierSBMConfig":
        d = json.loads(text)
        if "year_range" in d:
            d["year_range"] = tuple(d["year_range"])
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def block_paths(cfg: HierSBMConfig) -> np.ndarray:
    """(n, L) block path per node; nodes fill leaf blocks contiguously and evenly."""
    n_leaves = int(np.prod(cfg.branching))
    leaf = (np.arange(cfg.n_nodes) * n_leaves) // cfg.n_nodes
    paths = np.empty((cfg.n_nodes, len(cfg.branching)), dtype=np.int64)
    rem = leaf.copy()
    for lvl in range(len(cfg.branching) - 1, -1, -1):
        paths[:, lvl] = rem % cfg.branching[lvl]
        rem //= cfg.branching[lvl]
    return paths


def code_for_path(path) -> str:
    b = list(path) + [0] * (4 - len(path))
    return f"{b[0]}{b[1]}.{b[2]}0.A{chr(ord('a') + b[3])}"


def _degree_weights(cfg: HierSBMConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.degree_exponent is None:
        return np.ones(cfg.n_nodes)
    # Pareto weights with tail exponent degree_exponent, normalized to mean 1
    w = (1.0 - rng.random(cfg.n_nodes)) ** (-1.0 / (cfg.degree_exponent - 1.0))
    return w / w.mean()


def pair_probabilities(cfg: HierSBMConfig, paths: np.ndarray, weights: np.ndarray,
                       latest: np.ndarray, i: int) -> np.ndarray:
    """Edge probabilities between node i and nodes i+1..n-1."""
    probs = np.asarray(cfg.level_probs, dtype=float)
    rest = paths[i + 1:]
    # depth of deepest shared block = length of the common prefix of block paths
    same = np.cumprod(rest == paths[i], axis=1)
    depth = same.sum(axis=1)
    p = probs[depth] * weights[i] * weights[i + 1:]
    boost = latest[i] | latest[i + 1:]
    p = np.where(boost, p * (1.0 + cfg.latest_year_boost), p)
    return np.minimum(p, 1.0)


def generate(cfg: HierSBMConfig) -> CitationGraph:
    """Sample a planted-hierarchy citation graph.

    Pairs are Bernoulli-sampled independently; rows are grouped into fixed
    chunks, each with its own seeded stream, so the output only depends on
    ``cfg``.  Each sampled pair is stored as a citation from the newer node
    (later year, then higher index) to the older one.
    """
    cfg.validate()
    n = cfg.n_nodes
    ss = np.random.SeedSequence(cfg.seed)
    meta_ss, weight_ss, pair_ss = ss.spawn(3)
    meta_rng = np.random.default_rng(meta_ss)
    lo, hi = cfg.year_range
    years = meta_rng.integers(lo, hi + 1, size=n)
    weights = _degree_weights(cfg, np.random.default_rng(weight_ss))
    paths = block_paths(cfg)
    latest = years == hi

    width = len(str(n - 1))
    meta = [NodeMeta(f"p{i:0{width}d}", int(years[i]), (parse_code(code_for_path(paths[i])),))
            for i in range(n)]

    n_chunks = (n + _ROW_CHUNK - 1) // _ROW_CHUNK
    chunk_seeds = pair_ss.spawn(n_chunks)
    edges = []
    for c in range(n_chunks):
        rng = np.random.default_rng(chunk_seeds[c])
        for i in range(c * _ROW_CHUNK, min(n, (c + 1) * _ROW_CHUNK)):
            if i == n - 1:
                break
            p = pair_probabilities(cfg, paths, weights, latest, i)
            hit = np.nonzero(rng.random(len(p)) < p)[0] + i + 1
            for j in hit:
                if years[j] >= years[i]:
                    edges.append((j, i))
                else:
                    edges.append((i, j))
    return CitationGraph.build(meta, np.array(edges, dtype=np.int64).reshape(-1, 2))


def expected_edge_count(cfg: HierSBMConfig) -> tuple:
    """(mean, variance) of the undirected edge count under ``cfg`` (given its years/weights)."""
    cfg.validate()
    ss = np.random.SeedSequence(cfg.seed)
    meta_ss, weight_ss, _ = ss.spawn(3)
    years = np.random.default_rng(meta_ss).integers(cfg.year_range[0], cfg.year_range[1] + 1,
                                                    size=cfg.n_nodes)
    weights = _degree_weights(cfg, np.random.default_rng(weight_ss))
    paths = block_paths(cfg)
    latest = years == cfg.year_range[1]
    mean = var = 0.0
    for i in range(cfg.n_nodes - 1):
        p = pair_probabilities(cfg, paths, weights, latest, i)
        mean += p.sum()
        var += (p * (1 - p)).sum()
    return mean, var
