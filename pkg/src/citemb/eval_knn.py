"""KNN classification of depth-1 labels and the reference-majority baseline."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .corpus import CitationGraph, nodes_with_level_label, primary_labels
from .embed_store import EmbeddingMatrix, normalize_rows
from .stats import majority_label, micro_f1

logger = logging.getLogger(__name__)

DEFAULT_KS = (2, 4, 8, 16, 32, 64, 128)
_BLOCK = 1024


@dataclass
class KnnRun:
    method_tag: str
    ks: list
    split_seed: int
    train_fraction: float
    n_train: int
    n_test: int
    per_k_scores: dict = field(default_factory=dict)
    predictions: dict = field(default_factory=dict, repr=False)

    def as_records(self) -> list:
        return [{"method_tag": self.method_tag, "k": k, "micro_f1": self.per_k_scores[k],
                 "n_train": self.n_train, "n_test": self.n_test, "split_seed": self.split_seed}
                for k in self.ks]


def split_nodes(node_ids, train_fraction: float = 0.8, seed: int = 0):
    """Uniform (unstratified) train/test split of sorted ids; returns (train, test) lists."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    ids = sorted(node_ids)
    perm = np.random.default_rng(seed).permutation(len(ids))
    n_train = int(round(train_fraction * len(ids)))
    train = sorted(ids[i] for i in perm[:n_train])
    test = sorted(ids[i] for i in perm[n_train:])
    return train, test


def nearest_neighbors(train_x: np.ndarray, query_x: np.ndarray, k: int):
    """Exact k nearest training rows by cosine distance.

    Returns (indices, distances), each (n_query, k), ordered by distance then
    training index.  Works block-wise on normalized rows.
    """
    if k > train_x.shape[0]:
        raise ValueError(f"k={k} exceeds the {train_x.shape[0]} training points")
    tn = normalize_rows(train_x)
    qn = normalize_rows(query_x)
    n_train = tn.shape[0]
    idx_out = np.empty((qn.shape[0], k), dtype=np.int64)
    dist_out = np.empty((qn.shape[0], k))
    cols = np.arange(n_train)
    for lo in range(0, qn.shape[0], _BLOCK):
        d = 1.0 - qn[lo:lo + _BLOCK] @ tn.T
        if k < n_train:
            part = np.argpartition(d, k - 1, axis=1)[:, :k]
            kth = np.take_along_axis(d, part, axis=1).max(axis=1, keepdims=True)
            # take every point tied with the k-th distance so the index tie-break is exact
            for r in range(d.shape[0]):
                cand = cols[d[r] <= kth[r]]
                order = np.lexsort((cand, d[r, cand]))[:k]
                idx_out[lo + r] = cand[order]
                dist_out[lo + r] = d[r, cand[order]]
        else:
            order = np.lexsort((np.broadcast_to(cols, d.shape), d), axis=1)
            idx_out[lo:lo + d.shape[0]] = order
            dist_out[lo:lo + d.shape[0]] = np.take_along_axis(d, order, axis=1)
    return idx_out, dist_out


def _eligible(e: EmbeddingMatrix, labels: dict):
    usable = e.usable_ids()
    dropped = [n for n in labels if n not in usable]
    if dropped:
        logger.warning("knn: %d labeled nodes without a usable vector excluded", len(dropped))
    return sorted(n for n in labels if n in usable)


def knn_classify(e: EmbeddingMatrix, labels: dict, ks=DEFAULT_KS, split_seed: int = 0,
                 train_fraction: float = 0.8, label_sets: dict = None) -> KnnRun:
    """Predict each test node's label by majority over its k nearest training nodes.

    ``labels`` maps node id to its ground-truth (primary) label.  With
    ``label_sets`` given, a prediction counts as correct when it is anywhere in
    the node's label set.
    """
    ks = [int(k) for k in (ks if np.iterable(ks) else [ks])]
    nodes = _eligible(e, labels)
    train, test = split_nodes(nodes, train_fraction, split_seed)
    if not test:
        raise ValueError("empty test set")
    if max(ks) > len(train):
        raise ValueError(f"k={max(ks)} exceeds the {len(train)} training nodes")
    train_lab = [labels[n] for n in train]
    idx, dist = nearest_neighbors(e.rows(train), e.rows(test), max(ks))
    run = KnnRun(e.method_tag, ks, split_seed, train_fraction, len(train), len(test))
    for k in ks:
        pred = [majority_label([train_lab[j] for j in idx[r, :k]], dist[r, :k])
                for r in range(len(test))]
        truth = _truth(test, pred, labels, label_sets)
        run.per_k_scores[k] = micro_f1(pred, truth)
        run.predictions[k] = dict(zip(test, pred))
    return run


def _truth(test, pred, labels, label_sets):
    if label_sets is None:
        return [labels[n] for n in test]
    return [p if p in label_sets.get(n, ()) else labels[n] for n, p in zip(test, pred)]


def reference_majority_baseline(g: CitationGraph, labels: dict, split_seed: int = 0,
                                train_fraction: float = 0.8, nodes=None,
                                label_sets: dict = None) -> dict:
    """Label each test node by majority vote over its references' labels.

    The split matches :func:`knn_classify` when given the same ``nodes``
    and seed.  Test nodes with no labeled reference are skipped and counted.
    """
    nodes = sorted(labels) if nodes is None else sorted(nodes)
    _, test = split_nodes(nodes, train_fraction, split_seed)
    pred, kept, skipped = [], [], 0
    for nid in test:
        refs = [g.ids[j] for j in g.references(g.index[nid])]
        ref_labels = [labels[r] for r in refs if r in labels]
        if not ref_labels:
            skipped += 1
            continue
        pred.append(majority_label(ref_labels))
        kept.append(nid)
    score = micro_f1(pred, _truth(kept, pred, labels, label_sets)) if kept else float("nan")
    return {"micro_f1": score, "n_test": len(kept), "n_skipped": skipped,
            "split_seed": split_seed}


def default_labels(g: CitationGraph, multilabel: bool = False):
    """(primary depth-1 labels, depth-1 label sets or None)."""
    return primary_labels(g, 1), (nodes_with_level_label(g, 1) if multilabel else None)


def write_sweep_csv(run: KnnRun, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["method_tag", "k", "micro_f1", "n_train", "n_test",
                                           "split_seed"], lineterminator="\n")
        w.writeheader()
        w.writerows(run.as_records())


def write_json(run: KnnRun, path, k: int = None) -> None:
    recs = run.as_records()
    payload = recs if k is None else next(r for r in recs if r["k"] == k)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
