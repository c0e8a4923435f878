"""Graph embeddings: Laplacian Eigenmap, node2vec, residual2vec."""

from __future__ import annotations

from dataclasses import replace

from ..corpus import CitationGraph
from ..embed_store import EmbeddingMatrix
from .sgns import SgnsConfig, fit_sgns, noise_distribution, train_sgns
from .spectral import EigenSolverError, laplacian_eigenmap
from .walks import WalkConfig, WalkCorpus, generate_walks

METHODS = ("laplacian", "node2vec", "residual2vec")


def node2vec(g: CitationGraph, walk_cfg: WalkConfig = None, sgns_cfg: SgnsConfig = None,
             workers: int = 1, telemetry=None) -> EmbeddingMatrix:
    """Random walks + SGNS with the walk-frequency unigram noise distribution."""
    walk_cfg = walk_cfg or WalkConfig()
    sgns_cfg = replace(sgns_cfg or SgnsConfig(), noise_mode="unigram_pow")
    walks = generate_walks(g, walk_cfg, workers=workers)
    return train_sgns(walks, sgns_cfg, g, workers=workers, telemetry=telemetry,
                      method_tag="node2vec")


def residual2vec(g: CitationGraph, walk_cfg: WalkConfig = None, sgns_cfg: SgnsConfig = None,
                 workers: int = 1, telemetry=None) -> EmbeddingMatrix:
    """Random walks + SGNS with configuration-model noise (negatives drawn proportional to degree).

    This is the noise-replacement variant: degree-proportional negatives cancel
    the degree bias that the walk sampling puts into co-occurrence counts.
    """
    walk_cfg = walk_cfg or WalkConfig()
    sgns_cfg = replace(sgns_cfg or SgnsConfig(), noise_mode="config_model")
    walks = generate_walks(g, walk_cfg, workers=workers)
    return train_sgns(walks, sgns_cfg, g, workers=workers, telemetry=telemetry,
                      method_tag="residual2vec")


__all__ = [
    "METHODS", "EigenSolverError", "SgnsConfig", "WalkConfig", "WalkCorpus",
    "fit_sgns", "generate_walks", "laplacian_eigenmap", "node2vec", "noise_distribution",
    "residual2vec", "train_sgns",
]
