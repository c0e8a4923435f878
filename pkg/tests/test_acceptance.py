"""Acceptance criteria, one test per criterion.

Each test records a single PASS/FAIL line; the lines are printed at the end of
the pytest run (see conftest.py) or directly when this file is executed as a
script.  Full-data mode runs only when CITEMB_APS_EDGES and CITEMB_APS_META
point at the corpus files (CITEMB_APS_EXTERNAL optionally names an external
text-embedding vector file).
"""

import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import spearmanr

sys.path.insert(0, str(Path(__file__).parent))

from citemb import cli  # noqa: E402
from citemb.embed_graph import SgnsConfig, WalkConfig, laplacian_eigenmap, node2vec, residual2vec  # noqa: E402
from citemb.embed_graph.sgns import pair_loss, pair_loss_grad  # noqa: E402
from citemb.eval_hier import rog_of_vectors  # noqa: E402
from citemb.pipeline import PipelineConfig, run  # noqa: E402
from citemb.stats import js_divergence, roc_auc, t_test_one_sample, wilcoxon_signed_rank_one_sample  # noqa: E402
from citemb.synthgen import HierSBMConfig, generate  # noqa: E402
from conftest import random_connected_graph  # noqa: E402
from test_sgns import central_diff, rel_err  # noqa: E402
from test_spectral import dense_oracle  # noqa: E402
from test_stats import auc_oracle, t_oracle, wilcoxon_enumeration  # noqa: E402

RESULTS = []


def record(name, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else "")
    RESULTS.append(line)
    return ok


def check(name, ok, detail=""):
    record(name, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# 1. statistical kernel
# ---------------------------------------------------------------------------

def test_stats_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2718)
    w_err = 0.0
    for n in range(1, 13):
        for alt in ("less", "greater", "two_sided"):
            for _ in range(2):
                x = np.round(rng.normal(0.2, 1, n), int(rng.integers(1, 4)))
                if np.all(x == 0):
                    continue
                r = wilcoxon_signed_rank_one_sample(x, 0.0, alt, method="exact")
                w_err = max(w_err, abs(r.p_value - wilcoxon_enumeration(x, 0.0, alt)[1]))
    t_err = 0.0
    for _ in range(60):
        x = rng.normal(0, 1, int(rng.integers(2, 50)))
        mu0 = float(rng.normal(0, 0.4))
        for alt in ("less", "greater", "two_sided"):
            t_err = max(t_err, abs(t_test_one_sample(x, mu0, alt).p_value - t_oracle(x, mu0, alt)[1]))
    jsd = js_divergence([1, 0], [0.5, 0.5])
    auc_exact = all(
        roc_auc(p, q) == auc_oracle(p, q)
        for p, q in ((rng.integers(0, 8, rng.integers(1, 40)) / 2.0,
                      rng.integers(0, 8, rng.integers(1, 40)) / 2.0) for _ in range(200)))
    elapsed = time.perf_counter() - t0
    ok = w_err <= 1e-12 and t_err <= 1e-9 and abs(jsd - 0.311278) <= 1e-6 and auc_exact \
        and elapsed < 60
    check("stats oracle equivalence", ok,
          f"wilcoxon max err {w_err:.1e}, t max err {t_err:.1e}, JSD {jsd:.7f}, "
          f"AUC exact on 200 = {auc_exact}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 2. radius of gyration
# ---------------------------------------------------------------------------

def test_rog_correctness():
    r2 = rog_of_vectors([[1, 0], [0, 1]])
    r_same = rog_of_vectors([[0.4, -1.3, 2.0]] * 9)
    rng = np.random.default_rng(31)
    worst = 0.0
    for _ in range(100):
        x = rng.normal(0.3, 1, (int(rng.integers(2, 60)), int(rng.integers(2, 20))))
        s = float(np.exp(rng.uniform(-5, 5)))
        worst = max(worst, abs(rog_of_vectors(s * x) - rog_of_vectors(x)))
    ok = abs(r2 - 0.2928932) <= 1e-7 and abs(r2 - (1 - 1 / math.sqrt(2))) <= 1e-9 \
        and r_same == 0.0 and worst <= 1e-9
    check("ROG correctness", ok,
          f"ROG{{(1,0),(0,1)}} = {r2:.10f}, identical = {r_same}, max rescale diff {worst:.1e}")


# ---------------------------------------------------------------------------
# 3. Laplacian Eigenmap
# ---------------------------------------------------------------------------

def test_eigenmap_dense_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1618)
    min_cos, max_val_err, n_checked = 1.0, 0.0, 0
    for _ in range(50):
        n = int(rng.integers(20, 201))
        g = random_connected_graph(rng, n, float(rng.uniform(2, 8)) / n)
        m = int(rng.integers(1, 9))
        e, vals = laplacian_eigenmap(g, m, return_eigenvalues=True)
        o_vals, o_vecs, all_vals = dense_oracle(g, m)
        max_val_err = max(max_val_err, float(np.max(np.abs(vals - o_vals[1:]))))
        for j in range(m):
            # eigenvectors are only defined up to rotation inside a repeated eigenvalue
            cluster = np.abs(all_vals - vals[j]) < 1e-6
            if cluster.sum() == 1:
                min_cos = min(min_cos, abs(float(e.vectors[:, j] @ o_vecs[:, j + 1])))
                n_checked += 1
    elapsed = time.perf_counter() - t0
    ok = min_cos >= 0.999 and max_val_err <= 1e-8 and elapsed < 120
    check("Laplacian Eigenmap vs dense oracle", ok,
          f"min |cos| {min_cos:.6f} over {n_checked} simple eigenvectors, "
          f"max eigenvalue err {max_val_err:.1e}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 4. SGNS gradient
# ---------------------------------------------------------------------------

def test_sgns_gradient_check():
    rng = np.random.default_rng(4242)
    worst = 0.0
    for _ in range(100):
        d, k = int(rng.integers(2, 33)), int(rng.integers(1, 11))
        u, v = rng.normal(0, 0.7, d), rng.normal(0, 0.7, d)
        negs = rng.normal(0, 0.7, (k, d))
        gu, gv, gn = pair_loss_grad(u, v, negs)
        worst = max(worst,
                    rel_err(gu, central_diff(lambda x: pair_loss(x, v, negs), u)),
                    rel_err(gv, central_diff(lambda x: pair_loss(u, x, negs), v)),
                    rel_err(gn, central_diff(lambda x: pair_loss(u, v, x), negs)))
    check("SGNS gradient check", worst < 1e-4, f"max relative error {worst:.2e} over 100 configs")


# ---------------------------------------------------------------------------
# 5. planted hierarchy end to end
# ---------------------------------------------------------------------------

PLANTED = {
    "synth": {"n_nodes": 1000, "branching": [4, 4, 4], "level_probs": [0.002, 0.02, 0.1, 0.5]},
    "dim": 32, "walk_length": 80, "walks_per_node": 10, "window": 10,
    "methods": ["node2vec", "residual2vec"], "ks": [8], "seed": 0,
}


def _planted_checks(block):
    knn = block["knn"]
    f1 = knn["micro_f1"]["8"]
    base = knn["reference_baseline"]["micro_f1"]
    a = f1 >= 0.90 and f1 > base - 0.05
    lv, tests = block["rog"]["levels"], block["rog"]["tests"]
    meds = [lv[str(d)]["median"] for d in (1, 2, 3)]
    ps = [tests[str(d)].get("p_value", 1.0) for d in (2, 3)]
    b = meds[0] > meds[1] > meds[2] and all(p < 0.01 for p in ps)
    pt = {t["sample"]: t for t in block["pairs"]["tests"]}
    mean = block["pairs"]["mean_distance"]
    c = (mean["same_l1"] < mean["different_pacs"] and pt["same_l1"].get("p_value", 1) < 0.01
         and mean["same_l2"] < mean["same_l1"] and pt["same_l2"].get("p_value", 1) < 0.01)
    auc = block["linkpred"]["auc"]
    d = auc >= 0.85
    detail = (f"F1@8 {f1:.3f} (baseline {base:.3f}); ROG medians "
              f"{'/'.join(f'{m:.4f}' for m in meds)} p {ps[0]:.1e},{ps[1]:.1e}; "
              f"t-test p {pt['same_l1'].get('p_value', float('nan')):.1e},"
              f"{pt['same_l2'].get('p_value', float('nan')):.1e}; AUC {auc:.3f}")
    return a and b and c and d, detail


@pytest.mark.slow
def test_planted_hierarchy_end_to_end(tmp_path):
    t0 = time.perf_counter()
    status, summary = run(PipelineConfig.from_dict({**PLANTED, "out": str(tmp_path)}))
    elapsed = time.perf_counter() - t0
    oks, details = [status == 0], []
    for method in PLANTED["methods"]:
        try:
            ok, detail = _planted_checks(summary["methods"][method])
        except KeyError as exc:
            ok, detail = False, f"missing result {exc}"
        oks.append(ok)
        details.append(f"{method} [{detail}]")
    ok = all(oks) and elapsed < 600
    check("planted hierarchy end-to-end", ok,
          "; ".join(details) + f"; errors {summary['errors']}; {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 6. degree debiasing
# ---------------------------------------------------------------------------

DEBIAS_GRAPH = dict(n_nodes=500, branching=[4, 4], level_probs=[0.004, 0.03, 0.15],
                    degree_exponent=2.5)


def _norm_degree_rho(e, g):
    deg = g.degree
    keep = deg > 0
    norms = np.linalg.norm(e.vectors, axis=1)
    return abs(spearmanr(np.log(deg[keep]), norms[keep]).statistic)


@pytest.mark.slow
def test_degree_debias_direction():
    wins, rows = 0, []
    for seed in range(5):
        g = generate(HierSBMConfig(**DEBIAS_GRAPH, seed=seed))
        wc = WalkConfig(seed=seed)
        sc = SgnsConfig(dim=32, seed=seed)
        r_n2v = _norm_degree_rho(node2vec(g, wc, sc), g)
        r_r2v = _norm_degree_rho(residual2vec(g, wc, sc), g)
        wins += r_r2v <= r_n2v
        rows.append(f"seed {seed}: n2v {r_n2v:.3f} r2v {r_r2v:.3f}")
    check("degree-debias direction", wins >= 4, f"{wins}/5 seeds; " + "; ".join(rows))


# ---------------------------------------------------------------------------
# 7. determinism
# ---------------------------------------------------------------------------

def test_run_all_determinism(tmp_path, monkeypatch):
    monkeypatch.setenv("CITEMB_WORKERS", "1")
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({
        "synth": {"n_nodes": 400, "branching": [4, 2], "level_probs": [0.003, 0.03, 0.2]},
        "methods": ["laplacian", "node2vec", "residual2vec"],
        "walk_length": 30, "walks_per_node": 5, "epochs": 2, "dim": 16,
        "ks": [2, 8], "pairs": 2000}))
    outs = []
    for name in ("a", "b"):
        status = cli.main(["run-all", "--config", str(conf), "--seed", "11",
                           "--out", str(tmp_path / name)])
        outs.append((status, (tmp_path / name / "summary.json").read_bytes()))
    same = outs[0][1] == outs[1][1]
    check("run-all determinism", same and outs[0][0] == 0,
          f"byte-identical summary: {same}, {len(outs[0][1])} bytes")


# ---------------------------------------------------------------------------
# 8. full-data mode (conditional)
# ---------------------------------------------------------------------------

APS_NODES, APS_CITATIONS = 452_096, 4_931_143


@pytest.mark.slow
@pytest.mark.skipif(not (os.environ.get("CITEMB_APS_EDGES") and os.environ.get("CITEMB_APS_META")),
                    reason="APS corpus files not provided")
def test_full_data_mode(tmp_path):
    methods = ["laplacian", "node2vec", "residual2vec"]
    if os.environ.get("CITEMB_APS_EXTERNAL"):
        methods.append("external:" + os.environ["CITEMB_APS_EXTERNAL"])
    cfg = PipelineConfig.from_dict({
        "edges": os.environ["CITEMB_APS_EDGES"], "meta": os.environ["CITEMB_APS_META"],
        "methods": methods, "allow_partial_external": True,
        "out": os.environ.get("CITEMB_APS_OUT", str(tmp_path))})
    status, summary = run(cfg)
    corpus = summary.get("corpus", {})
    counts_ok = (corpus.get("n_nodes"), corpus.get("n_citations")) == (APS_NODES, APS_CITATIONS)
    complete = all(set(b) == {"knn", "rog", "pairs", "linkpred"}
                   for b in summary["methods"].values())
    check("full-data mode", counts_ok and complete and status == 0,
          f"nodes {corpus.get('n_nodes')}, citations {corpus.get('n_citations')}, "
          f"KNN ordering {summary.get('knn_ordering')}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
