"""End-to-end pipeline: corpus -> embeddings -> evaluations -> reports.

Output layout under ``out``::

    summary.json
    corpus/{edges.csv,meta.csv}            (synthetic corpora only)
    embeddings/<method>.vec
    telemetry/<method>.csv                 (SGNS methods)
    <method>/knn.json, knn_sweep.csv, knn_baseline.json
    <method>/rog.csv, rog.json
    <method>/pairs.json, pairs_hist.csv
    <method>/linkpred.json, roc.csv
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import zlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import embed_store, eval_hier, eval_knn, eval_linkpred
from .corpus import CitationGraph, load_corpus, nodes_with_level_label, save_corpus
from .embed_graph import (SgnsConfig, WalkConfig, laplacian_eigenmap, node2vec,
                          residual2vec)
from .embed_store import EmbeddingMatrix
from .synthgen import HierSBMConfig, generate

logger = logging.getLogger(__name__)

WORKERS_ENV = "CITEMB_WORKERS"
NATIVE_METHODS = ("laplacian", "node2vec", "residual2vec")
EVALUATIONS = ("knn", "rog", "pairs", "linkpred")


class PipelineError(RuntimeError):
    def __init__(self, module: str, msg: str):
        super().__init__(f"[{module}] {msg}")
        self.module = module


@dataclass
class PipelineConfig:
    edges: Optional[str] = None
    meta: Optional[str] = None
    synth: Optional[dict] = None
    methods: list = field(default_factory=lambda: ["node2vec"])
    evals: list = field(default_factory=lambda: list(EVALUATIONS))
    seed: int = 0
    out: str = "out"
    dim: int = 128
    walk_length: int = 80
    walks_per_node: int = 10
    window: int = 10
    restart_prob: float = 0.01
    p: float = 1.0
    q: float = 1.0
    epochs: int = 5
    negatives: int = 5
    ks: list = field(default_factory=lambda: list(eval_knn.DEFAULT_KS))
    train_fraction: float = 0.8
    multilabel: bool = False
    min_group_size: int = eval_hier.DEFAULT_MIN_GROUP_SIZE
    pairs: int = eval_hier.DEFAULT_PAIRS
    holdout_year: Optional[int] = None
    holdout_fraction: float = 0.5
    strict: bool = False
    allow_partial_external: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def validate(self) -> None:
        if not self.methods:
            raise ValueError("select at least one method")
        for m in self.methods:
            if m not in NATIVE_METHODS and not m.startswith("external:"):
                raise ValueError(f"unknown method {m!r}")
        if not self.evals:
            raise ValueError("select at least one evaluation")
        bad = set(self.evals) - set(EVALUATIONS)
        if bad:
            raise ValueError(f"unknown evaluations {sorted(bad)}")
        if self.synth is None and not (self.edges and self.meta):
            raise ValueError("give --edges and --meta, or a synth config")

    def hash(self) -> str:
        d = asdict(self)
        d.pop("out")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def substream_seed(seed: int, name: str) -> int:
    """Deterministic child seed for a named stage."""
    ss = np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode()),))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def method_name(method: str) -> str:
    if method.startswith("external:"):
        return "external-" + Path(method.split(":", 1)[1]).name.split(".")[0]
    return method


def load_graph(cfg: PipelineConfig) -> CitationGraph:
    if cfg.synth is not None:
        d = dict(cfg.synth)
        d.setdefault("seed", substream_seed(cfg.seed, "synth"))
        if "year_range" in d:
            d["year_range"] = tuple(d["year_range"])
        return generate(HierSBMConfig(**d))
    return load_corpus(cfg.edges, cfg.meta, strict=cfg.strict)


def embed(g: CitationGraph, method: str, cfg: PipelineConfig, stage: str,
          telemetry=None) -> EmbeddingMatrix:
    """Embed ``g`` with a native method; seeds derive from (cfg.seed, stage, method)."""
    seed = substream_seed(cfg.seed, f"{stage}/{method}")
    if method == "laplacian":
        return laplacian_eigenmap(g, cfg.dim, seed=seed)
    walk_cfg = WalkConfig(p=cfg.p, q=cfg.q, walk_length=cfg.walk_length,
                          walks_per_node=cfg.walks_per_node, window=cfg.window,
                          restart_prob=cfg.restart_prob, seed=seed)
    sgns_cfg = SgnsConfig(dim=cfg.dim, negatives=cfg.negatives, epochs=cfg.epochs,
                          seed=substream_seed(seed, "sgns"))
    fn = {"node2vec": node2vec, "residual2vec": residual2vec}[method]
    return fn(g, walk_cfg, sgns_cfg, workers=worker_count(), telemetry=telemetry)


def load_external(path, g: CitationGraph, allow_partial: bool = False) -> EmbeddingMatrix:
    """Load an externally computed embedding and check its ids against the corpus."""
    e = embed_store.load(path)
    for nid in e.ids:
        if nid not in g.index:
            raise ValueError(f"external embedding {path}: id {nid!r} not in corpus")
    if not allow_partial:
        for nid in g.ids:
            if nid not in e:
                raise ValueError(f"external embedding {path}: missing corpus id {nid!r}")
    return e


def _dump(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _stamp(d: dict, cfg: PipelineConfig) -> dict:
    return {"config_hash": cfg.hash(), "seed": cfg.seed, **d}


# ---------------------------------------------------------------------------
# per-evaluation drivers (each writes its own files and returns a summary block)
# ---------------------------------------------------------------------------

def run_knn(e, g, cfg, outdir: Path) -> dict:
    labels, sets = eval_knn.default_labels(g, cfg.multilabel)
    seed = substream_seed(cfg.seed, "knn-split")
    run = eval_knn.knn_classify(e, labels, cfg.ks, seed, cfg.train_fraction, sets)
    nodes = [n for n in labels if n in e.usable_ids()]
    base = eval_knn.reference_majority_baseline(g, labels, seed, cfg.train_fraction, nodes, sets)
    eval_knn.write_sweep_csv(run, outdir / "knn_sweep.csv")
    block = _stamp({"method_tag": e.method_tag, "split_seed": seed,
                    "n_train": run.n_train, "n_test": run.n_test,
                    "micro_f1": {str(k): v for k, v in run.per_k_scores.items()},
                    "reference_baseline": base}, cfg)
    _dump(_stamp({"method_tag": e.method_tag, "records": run.as_records()}, cfg),
          outdir / "knn.json")
    _dump(_stamp({"method_tag": "reference-majority", **base}, cfg), outdir / "knn_baseline.json")
    return block


def run_rog(e, g, cfg, outdir: Path) -> dict:
    rep = eval_hier.rog_by_level(e, g, cfg.min_group_size)
    eval_hier.write_rog_csv(rep["records"], outdir / "rog.csv")
    block = _stamp({"method_tag": e.method_tag, "min_group_size": cfg.min_group_size,
                    "levels": {str(k): v for k, v in rep["levels"].items()},
                    "tests": {str(k): v for k, v in rep["tests"].items()}}, cfg)
    _dump(block, outdir / "rog.json")
    return block


def run_pairs(e, g, cfg, outdir: Path) -> dict:
    usable = e.usable_ids()
    samples = {}
    for cat in eval_hier.CATEGORIES:
        samples[cat] = eval_hier.sample_pairs(g, cat, cfg.pairs,
                                              substream_seed(cfg.seed, f"pairs/{cat}"), usable)
    rep = eval_hier.pair_distance_analysis(e, samples)
    eval_hier.write_histogram_csv(rep, outdir / "pairs_hist.csv")
    block = _stamp({"method_tag": e.method_tag,
                    **{k: rep[k] for k in ("categories", "js_distance", "mean_distance",
                                           "n_pairs", "tests")}}, cfg)
    _dump(block, outdir / "pairs.json")
    return block


def run_linkpred(method, g, cfg, outdir: Path, external=None) -> dict:
    year = cfg.holdout_year
    if year is None:
        year = int(max(m.year for m in g.meta if m.year is not None))
    split = eval_linkpred.make_holdout(g, year, cfg.holdout_fraction,
                                       substream_seed(cfg.seed, "holdout"))
    if external is not None:
        fn = external
    else:
        def fn(residual):
            return embed(residual, method, cfg, "linkpred")
    rep = eval_linkpred.score_and_auc(split, fn)
    eval_linkpred.write_roc_csv(rep, outdir / "roc.csv")
    # the module's "seed" is the holdout substream; reports keep "seed" for the global one
    rep["holdout_seed"] = rep.pop("seed")
    block = _stamp({k: v for k, v in rep.items() if k != "roc"}, cfg)
    _dump(block, outdir / "linkpred.json")
    return block


_DRIVERS = {"knn": run_knn, "rog": run_rog, "pairs": run_pairs}
_MODULE = {"knn": "eval_knn", "rog": "eval_hier", "pairs": "eval_hier",
           "linkpred": "eval_linkpred"}


def run(cfg: PipelineConfig) -> tuple:
    """Run every selected method x evaluation. Returns (exit_status, summary)."""
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"config_hash": cfg.hash(), "seed": cfg.seed, "config": asdict(cfg),
               "methods": {}, "errors": []}
    summary["config"].pop("out")

    def fail(module, exc):
        err = str(PipelineError(module, str(exc)))
        logger.error(err)
        summary["errors"].append(err)

    try:
        g = load_graph(cfg)
    except Exception as exc:
        fail("synthgen" if cfg.synth is not None else "corpus", exc)
        _dump(summary, out / "summary.json")
        return 1, summary
    summary["corpus"] = {"n_nodes": g.n_nodes, "n_citations": int(len(g.edges)),
                         "n_undirected_edges": g.n_edges,
                         "n_labeled": len(nodes_with_level_label(g, 1))}
    if cfg.synth is not None:
        (out / "corpus").mkdir(exist_ok=True)
        save_corpus(g, out / "corpus" / "edges.csv", out / "corpus" / "meta.csv")

    for method in cfg.methods:
        name = method_name(method)
        mdir = out / name
        mdir.mkdir(exist_ok=True)
        block = summary["methods"].setdefault(name, {})
        external = None
        try:
            if method.startswith("external:"):
                e = external = load_external(method.split(":", 1)[1], g,
                                             cfg.allow_partial_external)
            else:
                (out / "telemetry").mkdir(exist_ok=True)
                tel = out / "telemetry" / f"{name}.csv" if method != "laplacian" else None
                e = embed(g, method, cfg, "full", telemetry=tel)
            (out / "embeddings").mkdir(exist_ok=True)
            embed_store.save(e, out / "embeddings" / f"{name}.vec")
        except Exception as exc:
            fail("embed_store" if method.startswith("external:") else "embed_graph", exc)
            continue
        for ev in cfg.evals:
            try:
                if ev == "linkpred":
                    block[ev] = run_linkpred(method, g, cfg, mdir, external)
                else:
                    block[ev] = _DRIVERS[ev](e, g, cfg, mdir)
            except Exception as exc:
                fail(_MODULE[ev], f"{name}: {exc}")
                block[ev] = {"error": str(exc)}

    if "knn" in cfg.evals:
        k_ref = 8 if 8 in cfg.ks else cfg.ks[0]
        scores = {m: b["knn"]["micro_f1"][str(k_ref)] for m, b in summary["methods"].items()
                  if "knn" in b and "micro_f1" in b["knn"]}
        summary["knn_ordering"] = {"k": k_ref,
                                   "methods": sorted(scores, key=lambda m: (-scores[m], m))}
    _dump(summary, out / "summary.json")
    return (1 if summary["errors"] else 0), summary
