"""Laplacian Eigenmap on the symmetric normalized adjacency D^-1/2 A D^-1/2."""

from __future__ import annotations

import logging

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from ..corpus import CitationGraph, connected_components
from ..embed_store import EmbeddingMatrix

logger = logging.getLogger(__name__)

# below this size the dense solver is cheaper and exact
DENSE_MAX_N = 64


class EigenSolverError(RuntimeError):
    def __init__(self, msg, residual_norm=float("nan")):
        super().__init__(f"{msg} (residual norm {residual_norm:.3e})")
        self.residual_norm = residual_norm


def normalized_adjacency(adj: sparse.spmatrix) -> sparse.csr_matrix:
    deg = np.asarray(adj.sum(axis=1)).ravel().astype(float)
    if np.any(deg == 0):
        raise ValueError("normalized adjacency undefined for zero-degree nodes")
    dinv = sparse.diags(1.0 / np.sqrt(deg))
    return (dinv @ adj.astype(float) @ dinv).tocsr()


def fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def top_eigenpairs(n_mat: sparse.csr_matrix, k: int, tol: float = 0.0, seed: int = 0):
    """k largest algebraic eigenpairs, eigenvalues descending."""
    n = n_mat.shape[0]
    if n <= DENSE_MAX_N or k >= n - 1:
        vals, vecs = np.linalg.eigh(n_mat.toarray())
        return vals[::-1][:k], vecs[:, ::-1][:, :k]
    v0 = np.random.default_rng(seed).standard_normal(n)
    try:
        vals, vecs = splinalg.eigsh(n_mat, k=k, which="LA", tol=tol, v0=v0,
                                    maxiter=max(1000, 20 * n))
    except splinalg.ArpackNoConvergence as exc:
        res = float("nan")
        if exc.eigenvalues.size:
            r = n_mat @ exc.eigenvectors - exc.eigenvectors * exc.eigenvalues
            res = float(np.linalg.norm(r, axis=0).max())
        raise EigenSolverError("eigensolver did not converge", res) from exc
    order = np.argsort(-vals)
    vals, vecs = vals[order], vecs[:, order]
    res = float(np.linalg.norm(n_mat @ vecs - vecs * vals, axis=0).max())
    if res > 1e-6:
        raise EigenSolverError("eigensolver residual too large", res)
    return vals, vecs


def laplacian_eigenmap(g: CitationGraph, m: int, disconnected: str = "lcc",
                       seed: int = 0, return_eigenvalues: bool = False):
    """Embed nodes with eigenvectors 2..m+1 of D^-1/2 A D^-1/2 (descending eigenvalues).

    ``disconnected="lcc"`` embeds the largest connected component and gives
    every other node (including zero-degree ones) a flagged zero vector;
    ``"strict"`` raises on a disconnected graph instead.
    """
    if m < 1:
        raise ValueError("dimension must be >= 1")
    comps = connected_components(g)
    if len(comps) > 1:
        if disconnected == "strict":
            raise ValueError(f"graph has {len(comps)} connected components")
        if disconnected != "lcc":
            raise ValueError(f"unknown disconnected mode {disconnected!r}")
        isolated = int(np.sum(g.degree == 0))
        logger.warning("laplacian_eigenmap: embedding largest component only; "
                       "%d nodes outside it (%d zero-degree) get zero vectors",
                       g.n_nodes - max(map(len, comps)), isolated)
    core = max(comps, key=len)
    if m >= len(core):
        raise ValueError(f"dimension {m} must be smaller than the component size {len(core)}")
    adj = g.adjacency[core][:, core]
    vals, vecs = top_eigenpairs(normalized_adjacency(adj), m + 1, seed=seed)
    vals, vecs = vals[1:], fix_signs(vecs[:, 1:])
    out = np.zeros((g.n_nodes, m))
    out[core] = vecs
    emb = EmbeddingMatrix(g.ids, out, "laplacian")
    if return_eigenvalues:
        return emb, vals
    return emb
