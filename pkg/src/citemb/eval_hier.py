"""Hierarchy tests: per-code radius of gyration across depths, and pair-distance distributions."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .corpus import N_LEVELS, CitationGraph, nodes_with_level_label
from .embed_store import EmbeddingMatrix, ZeroVectorError, normalize_rows
from .stats import (DegenerateSampleError, TestResult, histogram, js_distance,
                    t_test_one_sample, wilcoxon_signed_rank_one_sample)

logger = logging.getLogger(__name__)

CATEGORIES = ("random", "different_pacs", "same_l1", "same_l2")
DEFAULT_MIN_GROUP_SIZE = 5
DEFAULT_PAIRS = 15000
HIST_RANGE = (0.0, 2.0)
HIST_BINS = 100


class InfeasibleCategoryError(ValueError):
    pass


@dataclass(frozen=True)
class RogRecord:
    code: str
    depth: int
    n_members: int
    rog: float


@dataclass
class PairSample:
    category: str
    pairs: list
    distances: list = None


# ---------------------------------------------------------------------------
# radius of gyration
# ---------------------------------------------------------------------------

def rog_of_vectors(x: np.ndarray) -> float:
    """Root-mean-square cosine distance of the rows of ``x`` to their centroid."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("rog needs at least one vector")
    c = x.mean(axis=0)
    cn = np.linalg.norm(c)
    norms = np.linalg.norm(x, axis=1)
    if cn == 0.0:
        raise ZeroVectorError("centroid is the zero vector")
    if np.any(norms == 0.0):
        raise ZeroVectorError("zero member vector")
    cos = np.clip((x @ c) / (norms * cn), -1.0, 1.0)
    return float(np.sqrt(np.mean((1.0 - cos) ** 2)))


def rog(e: EmbeddingMatrix, members) -> float:
    return rog_of_vectors(e.rows(sorted(members)))


def code_members(g: CitationGraph, depth: int, allowed=None) -> dict:
    """code prefix -> sorted member ids; a node joins every code it carries."""
    groups = {}
    for nid, labels in nodes_with_level_label(g, depth).items():
        if allowed is not None and nid not in allowed:
            continue
        for lab in labels:
            groups.setdefault(lab, []).append(nid)
    return {k: sorted(v) for k, v in sorted(groups.items())}


def _quartiles(values):
    q = np.percentile(values, [0, 25, 50, 75, 100])
    return dict(zip(("min", "q1", "median", "q3", "max"), map(float, q)))


def rog_by_level(e: EmbeddingMatrix, g: CitationGraph,
                 min_group_size: int = DEFAULT_MIN_GROUP_SIZE) -> dict:
    """ROG of every code prefix at depths 1..4 and the depth-over-depth Wilcoxon tests.

    For each depth >= 2 the depth's ROG values are tested against the median
    of the previous depth's values, alternative "less".  Returns a dict with
    ``records`` (list of RogRecord), ``levels`` (per-depth summaries) and
    ``tests`` (depth -> TestResult dict, or an ``error`` entry).
    """
    usable = e.usable_ids()
    records = []
    by_depth = {}
    for depth in range(1, N_LEVELS + 1):
        vals = []
        for code, members in code_members(g, depth, usable).items():
            if len(members) < min_group_size:
                continue
            try:
                r = rog(e, members)
            except ZeroVectorError as exc:
                logger.warning("rog: code %s excluded (%s)", code, exc)
                continue
            records.append(RogRecord(code, depth, len(members), r))
            vals.append(r)
        by_depth[depth] = np.array(vals)

    levels, tests = {}, {}
    for depth in range(1, N_LEVELS + 1):
        vals = by_depth[depth]
        if vals.size == 0:
            levels[depth] = {"n_codes": 0, "absent": True}
            continue
        levels[depth] = {"n_codes": int(vals.size), **_quartiles(vals)}
        prev = by_depth.get(depth - 1)
        if depth == 1 or prev is None or prev.size == 0:
            continue
        mu0 = float(np.median(prev))
        try:
            res = wilcoxon_signed_rank_one_sample(vals, mu0, "less")
            tests[depth] = {**res.as_dict(), "median_current": float(np.median(vals)),
                            "median_previous": mu0}
        except DegenerateSampleError as exc:
            logger.warning("rog: depth %d test degenerate: %s", depth, exc)
            tests[depth] = {"error": str(exc), "median_current": float(np.median(vals)),
                            "median_previous": mu0}
    return {"records": records, "levels": levels, "tests": tests,
            "min_group_size": min_group_size}


def write_rog_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["code", "depth", "n", "rog"])
        for r in records:
            w.writerow([r.code, r.depth, r.n_members, repr(r.rog)])


# ---------------------------------------------------------------------------
# pair sampling
# ---------------------------------------------------------------------------

def _predicate(category, l1, l2):
    if category == "random":
        return lambda a, b: True
    if category == "different_pacs":
        return lambda a, b: l1[a].isdisjoint(l1[b])
    if category == "same_l1":
        return lambda a, b: not l1[a].isdisjoint(l1[b])
    if category == "same_l2":
        return lambda a, b: not l2.get(a, frozenset()).isdisjoint(l2.get(b, frozenset()))
    raise ValueError(f"unknown category {category!r}")


def sample_pairs(g: CitationGraph, category: str, sample_size: int = DEFAULT_PAIRS,
                 seed: int = 0, nodes=None, max_draws_factor: int = 1000) -> PairSample:
    """Uniformly sample ``sample_size`` pairs of distinct labeled nodes meeting ``category``.

    Pairs are drawn independently (with replacement) by rejection from all
    pairs of distinct labeled nodes; ``nodes`` restricts the candidates.
    """
    l1 = nodes_with_level_label(g, 1)
    l2 = nodes_with_level_label(g, 2)
    cand = sorted(l1 if nodes is None else (n for n in nodes if n in l1))
    if len(cand) < 2:
        raise InfeasibleCategoryError("fewer than two labeled nodes")
    if category == "different_pacs" and len(set().union(*(l1[n] for n in cand))) < 2:
        raise InfeasibleCategoryError("different_pacs needs at least two depth-1 labels")
    accept = _predicate(category, l1, l2)
    rng = np.random.default_rng(seed)
    pairs = []
    drawn = 0
    budget = max_draws_factor * sample_size
    n = len(cand)
    while len(pairs) < sample_size:
        if drawn >= budget:
            raise InfeasibleCategoryError(
                f"{category}: only {len(pairs)} of {sample_size} pairs after {drawn} draws")
        batch = min(budget - drawn, max(1024, 2 * (sample_size - len(pairs))))
        a = rng.integers(0, n, size=batch)
        b = rng.integers(0, n - 1, size=batch)
        b = b + (b >= a)  # distinct second node, uniform over the others
        drawn += batch
        for i, j in zip(a.tolist(), b.tolist()):
            u, v = cand[i], cand[j]
            if accept(u, v):
                pairs.append((u, v))
                if len(pairs) == sample_size:
                    break
    return PairSample(category, pairs)


def pair_distances(e: EmbeddingMatrix, pairs) -> np.ndarray:
    if not pairs:
        raise ValueError("empty pair list")
    a = normalize_rows(e.rows([p[0] for p in pairs]))
    b = normalize_rows(e.rows([p[1] for p in pairs]))
    return 1.0 - np.einsum("ij,ij->i", a, b)


# Table-2 style comparisons: (sample, reference whose mean is mu0, alternative)
PAIR_TESTS = (
    ("different_pacs", "random", "two_sided"),
    ("same_l1", "different_pacs", "less"),
    ("same_l2", "same_l1", "less"),
)


def pair_distance_analysis(e: EmbeddingMatrix, samples: dict) -> dict:
    """JS-distance matrix of the four distance distributions plus the three one-sample t-tests."""
    dists, hists = {}, {}
    for cat in CATEGORIES:
        s = samples[cat]
        d = pair_distances(e, s.pairs)
        s.distances = d.tolist()
        dists[cat] = d
        hists[cat], edges, _ = histogram(d, HIST_RANGE, HIST_BINS)
    js = np.zeros((len(CATEGORIES), len(CATEGORIES)))
    for i, a in enumerate(CATEGORIES):
        for j, b in enumerate(CATEGORIES):
            if j > i:
                js[i, j] = js[j, i] = js_distance(hists[a], hists[b])
    tests = []
    for cat, ref, alt in PAIR_TESTS:
        entry = {"sample": cat, "reference": ref, "alternative": alt,
                 "mu0": float(dists[ref].mean())}
        try:
            entry.update(t_test_one_sample(dists[cat], entry["mu0"], alt).as_dict())
        except DegenerateSampleError as exc:
            logger.warning("pairs: t-test %s vs %s degenerate: %s", cat, ref, exc)
            entry["error"] = str(exc)
        tests.append(entry)
    return {
        "categories": list(CATEGORIES),
        "js_distance": js.tolist(),
        "mean_distance": {c: float(dists[c].mean()) for c in CATEGORIES},
        "n_pairs": {c: int(dists[c].size) for c in CATEGORIES},
        "tests": tests,
        "histograms": {c: hists[c].tolist() for c in CATEGORIES},
        "bin_edges": edges.tolist(),
    }


def write_histogram_csv(report: dict, path) -> None:
    edges = report["bin_edges"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", *CATEGORIES])
        for k in range(len(edges) - 1):
            w.writerow([repr(edges[k]), repr(edges[k + 1]),
                        *(repr(report["histograms"][c][k]) for c in CATEGORIES)])
