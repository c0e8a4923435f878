"""Embedding matrices: in-memory container, text file format, and vector math.

File format (UTF-8, LF)::

    n d method_tag
    node_id v1 v2 ... vd
    ...

Values are written with 9 significant digits.  A ``.gz`` suffix selects the
gzip-compressed variant of the same bytes.
"""

from __future__ import annotations

import gzip
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class EmbeddingFormatError(ValueError):
    pass


class ZeroVectorError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    ids: tuple
    vectors: np.ndarray
    method_tag: str = "unknown"
    index: dict = field(default=None, repr=False)

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != len(self.ids):
            raise ValueError("vectors must be (len(ids), dim)")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite entries in embedding")
        if any(ch.isspace() for ch in self.method_tag) or not self.method_tag:
            raise ValueError(f"method_tag must be a nonempty token: {self.method_tag!r}")
        idx = {nid: i for i, nid in enumerate(self.ids)}
        if len(idx) != len(self.ids):
            raise ValueError("duplicate node ids in embedding")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "index", idx)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, node_id) -> bool:
        return node_id in self.index

    def vector(self, node_id) -> np.ndarray:
        return self.vectors[self.index[node_id]]

    def rows(self, node_ids) -> np.ndarray:
        return self.vectors[[self.index[n] for n in node_ids]]

    @property
    def zero_mask(self) -> np.ndarray:
        """True for rows that are exactly zero (flagged; evaluators exclude them)."""
        return ~np.any(self.vectors != 0.0, axis=1)

    def usable_ids(self) -> set:
        z = self.zero_mask
        return {nid for nid, flag in zip(self.ids, z) if not flag}


def _open(path, mode):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t", encoding="utf-8", newline="\n")
    return open(path, mode, encoding="utf-8", newline="\n")


def save(e: EmbeddingMatrix, path) -> None:
    with _open(path, "w") as fh:
        fh.write(f"{len(e.ids)} {e.dim} {e.method_tag}\n")
        for nid, row in zip(e.ids, e.vectors):
            if any(ch.isspace() for ch in nid):
                raise EmbeddingFormatError(f"node id contains whitespace: {nid!r}")
            fh.write(nid + " " + " ".join(f"{x:.9g}" for x in row) + "\n")


def load(path) -> EmbeddingMatrix:
    with _open(path, "r") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise EmbeddingFormatError(f"{path}:1: expected header 'n d method_tag'")
        try:
            n, d = int(header[0]), int(header[1])
        except ValueError:
            raise EmbeddingFormatError(f"{path}:1: bad n or d") from None
        if n < 1 or d < 1:
            raise EmbeddingFormatError(f"{path}:1: n and d must be >= 1")
        ids = []
        seen = set()
        vectors = np.empty((n, d), dtype=np.float64)
        for k, line in enumerate(fh):
            lineno = k + 2
            if k >= n:
                if line.strip():
                    raise EmbeddingFormatError(f"{path}:{lineno}: more rows than header n={n}")
                continue
            parts = line.split()
            if len(parts) != d + 1:
                raise EmbeddingFormatError(
                    f"{path}:{lineno}: expected {d} values, got {len(parts) - 1}")
            nid = parts[0]
            if nid in seen:
                raise EmbeddingFormatError(f"{path}:{lineno}: duplicate id {nid!r}")
            seen.add(nid)
            try:
                row = [float(x) for x in parts[1:]]
            except ValueError:
                raise EmbeddingFormatError(f"{path}:{lineno}: unparsable value") from None
            if not all(math.isfinite(x) for x in row):
                raise EmbeddingFormatError(f"{path}:{lineno}: non-finite value")
            ids.append(nid)
            vectors[k] = row
        if len(ids) != n:
            raise EmbeddingFormatError(f"{path}: header n={n} but {len(ids)} rows")
    return EmbeddingMatrix(tuple(ids), vectors, header[2])


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine similarity undefined for a zero vector")
    # clip guards the [-1, 1] contract against rounding
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def cosine_distance(a, b) -> float:
    return 1.0 - cosine_similarity(a, b)


def normalize_rows(x: np.ndarray) -> np.ndarray:
    """Unit-normalize rows; zero rows stay zero."""
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return np.divide(x, norms, out=np.zeros_like(x, dtype=float), where=norms > 0)


def centroid(vectors) -> np.ndarray:
    v = np.asarray(vectors, dtype=float)
    if v.ndim != 2 or v.shape[0] == 0:
        raise ValueError("centroid of an empty set")
    return v.mean(axis=0)
