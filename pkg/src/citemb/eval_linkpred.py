"""Link prediction on a latest-year holdout of citations, scored by cosine similarity."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .corpus import CitationGraph, largest_connected_component
from .embed_store import EmbeddingMatrix, normalize_rows
from .stats import roc_auc, roc_curve

logger = logging.getLogger(__name__)


@dataclass
class HoldoutSplit:
    """Positive/negative pairs are index pairs into ``graph`` (and ``residual_graph``, same nodes)."""

    graph: CitationGraph
    residual_graph: CitationGraph
    positives: np.ndarray
    negatives: np.ndarray
    holdout_year: int
    fraction: float
    seed: int

    def id_pairs(self, which: str) -> list:
        arr = self.positives if which == "positives" else self.negatives
        ids = self.graph.ids
        return [(ids[a], ids[b]) for a, b in arr]


def make_holdout(g: CitationGraph, year: int, fraction: float = 0.5, seed: int = 0,
                 max_draws_factor: int = 1000) -> HoldoutSplit:
    """Hold out a uniform ``fraction`` of the citations made by ``year`` papers.

    The graph is first restricted to its largest connected component.
    Positives are distinct undirected pairs with a citing endpoint in
    ``year``; they are removed from the graph.  The same number of negatives
    is drawn uniformly from node pairs with at least one endpoint in ``year``
    that are not adjacent in the original graph.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    g = largest_connected_component(g)
    n = g.n_nodes
    years = g.years()
    e = g.edges
    cand = e[(years[e[:, 0]] == year) & (e[:, 0] != e[:, 1])]
    if len(cand) == 0:
        raise ValueError(f"no citations from year {year}")
    cand = np.unique(np.sort(cand, axis=1), axis=0)
    n_pos = int(round(fraction * len(cand)))
    if n_pos == 0:
        raise ValueError("holdout fraction selects no edges")
    rng = np.random.default_rng(seed)
    positives = cand[np.sort(rng.choice(len(cand), size=n_pos, replace=False))]
    residual = g.without_edges(positives)

    in_year = np.nonzero(years == year)[0]
    n_year = len(in_year)
    n_pairs_touching = n_year * (n - n_year) + n_year * (n_year - 1) // 2
    n_nonadj = n_pairs_touching - _edges_touching(g, years == year)
    if n_nonadj < n_pos:
        raise ValueError(f"only {n_nonadj} non-adjacent pairs for {n_pos} negatives")
    negatives, seen = [], set()
    drawn, budget = 0, max_draws_factor * n_pos
    while len(negatives) < n_pos:
        if drawn >= budget:
            raise ValueError("could not sample enough negative pairs")
        drawn += 1
        u = int(in_year[rng.integers(n_year)])
        v = int(rng.integers(n - 1))
        v += v >= u
        # pairs with both ends in the year are reachable twice; keep them half the time
        if years[v] == year and rng.random() < 0.5:
            continue
        a, b = min(u, v), max(u, v)
        if (a, b) in seen or g.has_edge(a, b):
            continue
        seen.add((a, b))
        negatives.append((a, b))
    negatives = np.array(negatives, dtype=np.int64).reshape(-1, 2)
    return HoldoutSplit(g, residual, positives, negatives, year, fraction, seed)


def _edges_touching(g: CitationGraph, mask: np.ndarray) -> int:
    ue = g.undirected_edges()
    return int(np.count_nonzero(mask[ue[:, 0]] | mask[ue[:, 1]]))


def score_pairs(e: EmbeddingMatrix, id_pairs) -> tuple:
    """Cosine similarity per pair; pairs touching a zero vector score -1. Returns (scores, n_zero)."""
    for pair in id_pairs:
        for nid in pair:
            if nid not in e:
                raise KeyError(f"pair endpoint {nid!r} missing from embedding {e.method_tag}")
    a = e.rows([p[0] for p in id_pairs])
    b = e.rows([p[1] for p in id_pairs])
    zero = ~(np.any(a != 0, axis=1) & np.any(b != 0, axis=1))
    s = np.einsum("ij,ij->i", normalize_rows(a), normalize_rows(b))
    s = np.clip(s, -1.0, 1.0)
    s[zero] = -1.0
    return s, int(zero.sum())


def score_and_auc(split: HoldoutSplit, embed_fn) -> dict:
    """Embed the residual graph with ``embed_fn`` (or use a given matrix) and report ROC/AUC."""
    e = embed_fn if isinstance(embed_fn, EmbeddingMatrix) else embed_fn(split.residual_graph)
    pos, zp = score_pairs(e, split.id_pairs("positives"))
    neg, zn = score_pairs(e, split.id_pairs("negatives"))
    fpr, tpr, thr = roc_curve(pos, neg)
    return {
        "method_tag": e.method_tag,
        "auc": roc_auc(pos, neg),
        "n_pos": int(pos.size),
        "n_neg": int(neg.size),
        "n_zero_vector_pairs": zp + zn,
        "year": split.holdout_year,
        "fraction": split.fraction,
        "seed": split.seed,
        "roc": {"fpr": fpr.tolist(), "tpr": tpr.tolist(), "threshold": thr.tolist()},
    }


def write_roc_csv(report: dict, path) -> None:
    roc = report["roc"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr", "threshold"])
        for row in zip(roc["fpr"], roc["tpr"], roc["threshold"]):
            w.writerow([repr(float(x)) for x in row])
