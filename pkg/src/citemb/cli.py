"""Command-line interface.

Subcommands: ingest, synth, embed, eval-knn, eval-rog, eval-pairs,
eval-linkpred, run-all.  ``--config`` reads a JSON file of pipeline settings;
explicit flags override it.  Worker count comes from $CITEMB_WORKERS.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from . import embed_store, pipeline
from .corpus import load_corpus, nodes_with_level_label, save_corpus
from .pipeline import PipelineConfig
from .synthgen import HierSBMConfig, generate

log = logging.getLogger("citemb")

# flag dest -> PipelineConfig field
_OVERRIDES = {
    "edges": "edges", "meta": "meta", "method": "methods", "dim": "dim", "k": "ks",
    "seed": "seed", "out": "out", "min_group_size": "min_group_size", "pairs": "pairs",
    "holdout_year": "holdout_year", "holdout_fraction": "holdout_fraction",
    "epochs": "epochs", "evals": "evals", "strict": "strict", "multilabel": "multilabel",
}


def _common(p, *names):
    add = {
        "edges": lambda: p.add_argument("--edges", help="edge list, 'citing_id,cited_id' per line"),
        "meta": lambda: p.add_argument("--meta", help="metadata CSV 'node_id,year,codes'"),
        "method": lambda: p.add_argument(
            "--method", action="append",
            help="laplacian | node2vec | residual2vec | external:<path> (repeatable)"),
        "dim": lambda: p.add_argument("--dim", type=int),
        "k": lambda: p.add_argument("--k", type=int, action="append",
                                    help="neighbour count (repeatable)"),
        "seed": lambda: p.add_argument("--seed", type=int),
        "out": lambda: p.add_argument("--out"),
        "min_group_size": lambda: p.add_argument("--min-group-size", type=int),
        "pairs": lambda: p.add_argument("--pairs", type=int, help="pairs per category"),
        "holdout_year": lambda: p.add_argument("--holdout-year", type=int),
        "holdout_fraction": lambda: p.add_argument("--holdout-fraction", type=float),
        "epochs": lambda: p.add_argument("--epochs", type=int),
        "config": lambda: p.add_argument("--config", help="JSON pipeline config"),
        "embedding": lambda: p.add_argument("--embedding", required=True,
                                            help="vector file to evaluate"),
        "strict": lambda: p.add_argument("--strict", action="store_true", default=None,
                                         help="reject edges to ids without metadata"),
    }
    for n in names:
        add[n]()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="citemb", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a corpus and write its canonical form")
    _common(p, "edges", "meta", "out", "strict")

    p = sub.add_parser("synth", help="generate a hierarchical SBM corpus")
    p.add_argument("--synth-config", help="JSON HierSBMConfig")
    p.add_argument("--n-nodes", type=int)
    p.add_argument("--branching", type=int, nargs="+")
    p.add_argument("--level-probs", type=float, nargs="+", help="background first")
    p.add_argument("--degree-exponent", type=float)
    _common(p, "seed", "out")

    p = sub.add_parser("embed", help="embed a corpus with one native method")
    _common(p, "config", "edges", "meta", "method", "dim", "seed", "out", "epochs", "strict")

    p = sub.add_parser("eval-knn", help="KNN classification sweep + reference baseline")
    _common(p, "config", "edges", "meta", "embedding", "k", "seed", "out", "strict")
    p.add_argument("--multilabel", action="store_true", default=None)

    p = sub.add_parser("eval-rog", help="radius of gyration by code depth")
    _common(p, "config", "edges", "meta", "embedding", "min_group_size", "seed", "out", "strict")

    p = sub.add_parser("eval-pairs", help="pair-distance distributions, JS distances, t-tests")
    _common(p, "config", "edges", "meta", "embedding", "pairs", "seed", "out", "strict")

    p = sub.add_parser("eval-linkpred", help="latest-year holdout link prediction")
    _common(p, "config", "edges", "meta", "method", "dim", "seed", "out", "epochs",
            "holdout_year", "holdout_fraction", "strict")

    p = sub.add_parser("run-all", help="full pipeline over methods x evaluations")
    _common(p, "config", "edges", "meta", "method", "dim", "k", "seed", "out", "epochs",
            "min_group_size", "pairs", "holdout_year", "holdout_fraction", "strict")
    p.add_argument("--evals", nargs="+", choices=pipeline.EVALUATIONS)
    p.add_argument("--synth-config", help="JSON HierSBMConfig used instead of --edges/--meta")
    p.add_argument("--multilabel", action="store_true", default=None)
    return ap


def make_config(args) -> PipelineConfig:
    d = {}
    if getattr(args, "config", None):
        d.update(json.loads(Path(args.config).read_text()))
    if getattr(args, "synth_config", None):
        d["synth"] = json.loads(Path(args.synth_config).read_text())
    for flag, key in _OVERRIDES.items():
        val = getattr(args, flag, None)
        if val is not None:
            d[key] = val
    if d.get("edges") and "synth" in d and getattr(args, "edges", None):
        d.pop("synth")
    return PipelineConfig.from_dict(d)


def _out_dir(cfg) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(args) -> int:
    g = load_corpus(args.edges, args.meta, strict=bool(args.strict))
    out = Path(args.out or "corpus")
    out.mkdir(parents=True, exist_ok=True)
    save_corpus(g, out / "edges.csv", out / "meta.csv")
    stats = {"n_nodes": g.n_nodes, "n_citations": int(len(g.edges)),
             "n_undirected_edges": g.n_edges,
             "n_labeled": len(nodes_with_level_label(g, 1))}
    (out / "corpus_stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
    print(json.dumps(stats, sort_keys=True))
    return 0


def cmd_synth(args) -> int:
    d = json.loads(Path(args.synth_config).read_text()) if args.synth_config else {}
    for flag, key in (("n_nodes", "n_nodes"), ("branching", "branching"),
                      ("level_probs", "level_probs"), ("degree_exponent", "degree_exponent"),
                      ("seed", "seed")):
        if getattr(args, flag) is not None:
            d[key] = getattr(args, flag)
    cfg = HierSBMConfig.from_json(json.dumps(d))
    g = generate(cfg)
    out = Path(args.out or "synth")
    out.mkdir(parents=True, exist_ok=True)
    save_corpus(g, out / "edges.csv", out / "meta.csv")
    (out / "synth_config.json").write_text(cfg.to_json() + "\n")
    print(json.dumps({"n_nodes": g.n_nodes, "n_citations": int(len(g.edges)),
                      "n_undirected_edges": g.n_edges}, sort_keys=True))
    return 0


def cmd_embed(args) -> int:
    cfg = make_config(args)
    g = pipeline.load_graph(cfg)
    out = _out_dir(cfg)
    for method in cfg.methods:
        if method not in pipeline.NATIVE_METHODS:
            raise ValueError(f"embed: unknown native method {method!r}")
        tel = sys.stdout if method != "laplacian" else None
        e = pipeline.embed(g, method, cfg, "full", telemetry=tel)
        embed_store.save(e, out / f"{method}.vec")
        log.info("wrote %s", out / f"{method}.vec")
    return 0


def _eval_inputs(args):
    cfg = make_config(args)
    g = pipeline.load_graph(cfg)
    e = pipeline.load_external(args.embedding, g, allow_partial=True)
    return cfg, g, e, _out_dir(cfg)


def cmd_eval_knn(args) -> int:
    cfg, g, e, out = _eval_inputs(args)
    block = pipeline.run_knn(e, g, cfg, out)
    print(json.dumps(block["micro_f1"], sort_keys=True))
    return 0


def cmd_eval_rog(args) -> int:
    cfg, g, e, out = _eval_inputs(args)
    block = pipeline.run_rog(e, g, cfg, out)
    print(json.dumps(block["tests"], sort_keys=True))
    return 0


def cmd_eval_pairs(args) -> int:
    cfg, g, e, out = _eval_inputs(args)
    block = pipeline.run_pairs(e, g, cfg, out)
    print(json.dumps(block["tests"], sort_keys=True))
    return 0


def cmd_eval_linkpred(args) -> int:
    cfg = make_config(args)
    g = pipeline.load_graph(cfg)
    out = _out_dir(cfg)
    for method in cfg.methods:
        ext = None
        if method.startswith("external:"):
            ext = pipeline.load_external(method.split(":", 1)[1], g, allow_partial=True)
        mdir = out / pipeline.method_name(method)
        mdir.mkdir(exist_ok=True)
        block = pipeline.run_linkpred(method, g, cfg, mdir, ext)
        print(json.dumps({"method": method, "auc": block["auc"]}, sort_keys=True))
    return 0


def cmd_run_all(args) -> int:
    cfg = make_config(args)
    status, summary = pipeline.run(cfg)
    for err in summary["errors"]:
        print(err, file=sys.stderr)
    print(str(Path(cfg.out) / "summary.json"))
    return status


COMMANDS = {
    "ingest": cmd_ingest, "synth": cmd_synth, "embed": cmd_embed, "eval-knn": cmd_eval_knn,
    "eval-rog": cmd_eval_rog, "eval-pairs": cmd_eval_pairs, "eval-linkpred": cmd_eval_linkpred,
    "run-all": cmd_run_all,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    # numba falls back from an old system TBB to its own thread pool; not actionable
    warnings.filterwarnings("ignore", message="The TBB threading layer")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"citemb {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
