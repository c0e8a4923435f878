import numpy as np
import pytest

from citemb.embed_store import EmbeddingMatrix
from citemb.eval_linkpred import make_holdout, score_and_auc, score_pairs, write_roc_csv
from citemb.synthgen import HierSBMConfig, generate
from conftest import make_graph


def test_triangle_example():
    # only n2 is from 2010 and it cites n0; in a bare triangle no negative pair exists
    g = make_graph(3, [(1, 0), (2, 0), (1, 2)], years=[2008, 2009, 2010])
    with pytest.raises(ValueError, match="non-adjacent"):
        make_holdout(g, 2010, 1.0, seed=0)


def test_triangle_plus_spare_node():
    # triangle n0 n1 n2 with one 2010 citation (n2 -> n0); pendant n3 keeps a non-edge available
    g = make_graph(4, [(1, 0), (2, 0), (1, 2), (3, 1)], years=[2008, 2009, 2010, 2009])
    split = make_holdout(g, 2010, 1.0, seed=0)
    assert split.id_pairs("positives") == [("n0", "n2")]
    r = split.residual_graph
    tri = r.subgraph([0, 1, 2])
    assert sorted(map(tuple, tri.undirected_edges().tolist())) == [(0, 1), (1, 2)]
    assert split.id_pairs("negatives") == [("n2", "n3")]


@pytest.fixture(scope="module")
def synth():
    return generate(HierSBMConfig(n_nodes=400, branching=[4], level_probs=[0.005, 0.08], seed=2))


def test_holdout_invariants(synth):
    g = synth
    split = make_holdout(g, 2010, 0.5, seed=1)
    lcc = split.graph
    years = lcc.years()
    year_edges = {tuple(sorted(e)) for e in lcc.edges.tolist()
                  if years[e[0]] == 2010 and e[0] != e[1]}
    assert len(split.positives) == round(0.5 * len(year_edges))
    assert len(split.negatives) == len(split.positives)
    for a, b in split.positives:
        assert (a, b) in year_edges
        assert not split.residual_graph.has_edge(a, b)
    for a, b in split.negatives:
        assert not lcc.has_edge(a, b)
        assert a != b and (years[a] == 2010 or years[b] == 2010)
    assert len({tuple(p) for p in split.negatives.tolist()}) == len(split.negatives)
    assert split.residual_graph.n_edges == lcc.n_edges - len(split.positives)
    again = make_holdout(g, 2010, 0.5, seed=1)
    assert np.array_equal(again.positives, split.positives)
    assert np.array_equal(again.negatives, split.negatives)


def test_holdout_errors(synth):
    with pytest.raises(ValueError):
        make_holdout(synth, 2010, 0.0)
    with pytest.raises(ValueError):
        make_holdout(synth, 1900, 0.5)


def test_random_embedding_auc_near_half(synth):
    aucs = []
    for seed in range(10):
        split = make_holdout(synth, 2010, 0.5, seed=seed)
        x = np.random.default_rng(seed).normal(size=(split.graph.n_nodes, 16))
        rep = score_and_auc(split, EmbeddingMatrix(split.graph.ids, x, "gauss"))
        aucs.append(rep["auc"])
        assert 0.45 <= rep["auc"] <= 0.55
    assert 0.47 <= np.mean(aucs) <= 0.53


def test_community_embedding_auc_high():
    # near-disjoint blocks: held-out citations are almost all intra-block
    g = generate(HierSBMConfig(n_nodes=500, branching=[10], level_probs=[0.0005, 0.15], seed=4))
    split = make_holdout(g, 2010, 0.5, seed=0)
    g = split.graph
    blocks = [m.codes[0].prefix(1) for m in g.meta]
    onehot = {b: np.eye(10)[k] for k, b in enumerate(sorted(set(blocks)))}
    x = np.array([onehot[b] for b in blocks])
    rep = score_and_auc(split, EmbeddingMatrix(g.ids, x, "blocks"))
    assert rep["auc"] > 0.9


def test_zero_vectors_and_missing_ids(tmp_path):
    ids = ("a", "b", "c")
    e = EmbeddingMatrix(ids, np.array([[1.0, 0], [0, 0], [1.0, 0.1]]), "t")
    s, nz = score_pairs(e, [("a", "b"), ("a", "c")])
    assert s[0] == -1.0 and nz == 1 and s[1] > 0.99
    with pytest.raises(KeyError, match="zz"):
        score_pairs(e, [("a", "zz")])


def test_embed_fn_receives_residual(synth, tmp_path):
    split = make_holdout(synth, 2010, 0.5, seed=3)
    seen = []

    def fn(residual):
        seen.append(residual)
        return EmbeddingMatrix(residual.ids, np.ones((residual.n_nodes, 2)), "ones")

    rep = score_and_auc(split, fn)
    assert seen[0] is split.residual_graph
    assert rep["auc"] == 0.5 and rep["n_pos"] == rep["n_neg"]
    write_roc_csv(rep, tmp_path / "roc.csv")
    assert (tmp_path / "roc.csv").read_text().splitlines()[0] == "fpr,tpr,threshold"
