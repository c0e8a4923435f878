"""Citation corpus: node metadata, hierarchical codes, and the undirected graph view.

Nodes are indexed in lexicographic order of their ids.  The directed citation
list is kept as read; embeddings and evaluations work on the symmetrized simple
graph (no self-loops, parallel edges collapsed).
"""

from __future__ import annotations

import csv
import logging
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import sparse

logger = logging.getLogger(__name__)

N_LEVELS = 4

_CODE_RE = re.compile(
    r"^(?P<d1>\d)(?P<d2>\d)?(?:\.(?P<d3>\d\d)(?:\.(?P<d4>[A-Za-z0-9+\-]{2}))?)?$"
)


class CorpusFormatError(ValueError):
    """Malformed corpus file; carries the file name and 1-based line number."""

    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = str(path)
        self.lineno = lineno


@dataclass(frozen=True)
class HierCode:
    """A PACS-like code and its truncations at depths 1..4 (None when undefined)."""

    raw: str
    levels: tuple

    def prefix(self, depth: int) -> Optional[str]:
        if not 1 <= depth <= N_LEVELS:
            raise ValueError(f"depth must be in 1..{N_LEVELS}, got {depth}")
        return self.levels[depth - 1]

    @property
    def depth(self) -> int:
        return sum(lvl is not None for lvl in self.levels)


def parse_code(raw: str) -> HierCode:
    """Parse "dd.dd.Xx" (or a prefix of it) into its level prefixes.

    >>> parse_code("61.30.Jf").levels
    ('60', '61', '61.30', '61.30.Jf')
    """
    s = raw.strip()
    m = _CODE_RE.match(s)
    if m is None:
        raise ValueError(f"not a PACS-like code: {raw!r}")
    d1, d2, d3, d4 = m.group("d1", "d2", "d3", "d4")
    if d2 is None and d3 is not None:
        raise ValueError(f"not a PACS-like code: {raw!r}")
    l1 = d1 + "0"
    l2 = d1 + d2 if d2 is not None else None
    l3 = f"{l2}.{d3}" if d3 is not None else None
    l4 = f"{l3}.{d4}" if d4 is not None else None
    return HierCode(raw=s, levels=(l1, l2, l3, l4))


@dataclass(frozen=True)
class NodeMeta:
    node_id: str
    year: Optional[int] = None
    codes: tuple = ()

    @property
    def primary_code(self) -> Optional[HierCode]:
        return self.codes[0] if self.codes else None


@dataclass(frozen=True, eq=False)
class CitationGraph:
    """Immutable citation graph.

    ``edges`` holds directed (citing, cited) index pairs as read; ``adjacency``
    is the symmetric 0/1 CSR matrix of the simple undirected graph.
    """

    ids: tuple
    meta: tuple
    edges: np.ndarray
    adjacency: sparse.csr_matrix
    index: dict = field(repr=False)

    @classmethod
    def build(cls, meta: Sequence[NodeMeta], edges) -> "CitationGraph":
        """Build from metadata records and directed index pairs into ``meta``.

        ``meta`` is re-sorted by node id; ``edges`` index the input order.
        """
        order = sorted(range(len(meta)), key=lambda i: meta[i].node_id)
        meta_sorted = tuple(meta[i] for i in order)
        ids = tuple(m.node_id for m in meta_sorted)
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate node ids")
        remap = np.empty(len(meta), dtype=np.int64)
        remap[order] = np.arange(len(meta))
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= len(meta)):
            raise ValueError("edge endpoint out of range")
        e = remap[e] if e.size else e
        e.setflags(write=False)
        adj = _symmetric_adjacency(e, len(ids))
        return cls(ids=ids, meta=meta_sorted, edges=e, adjacency=adj,
                   index={nid: i for i, nid in enumerate(ids)})

    @property
    def n_nodes(self) -> int:
        return len(self.ids)

    @property
    def n_edges(self) -> int:
        """Undirected simple edge count."""
        return int(self.adjacency.nnz // 2)

    @property
    def degree(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[i]:a.indptr[i + 1]]

    def has_edge(self, i: int, j: int) -> bool:
        nb = self.neighbors(i)
        k = np.searchsorted(nb, j)
        return bool(k < len(nb) and nb[k] == j)

    def references(self, i: int) -> np.ndarray:
        """Distinct out-neighbours (cited works) of node ``i``, self-citations dropped."""
        refs = self._out_csr()
        out = refs.indices[refs.indptr[i]:refs.indptr[i + 1]]
        return out[out != i]

    def _out_csr(self):
        cached = self.__dict__.get("_out")
        if cached is None:
            n = self.n_nodes
            e = self.edges
            m = sparse.csr_matrix((np.ones(len(e), dtype=np.int8), (e[:, 0], e[:, 1])),
                                  shape=(n, n))
            m.sum_duplicates()
            m.sort_indices()
            cached = m
            object.__setattr__(self, "_out", cached)
        return cached

    def undirected_edges(self) -> np.ndarray:
        """(m, 2) array of undirected edges with i < j, row-major sorted."""
        upper = sparse.triu(self.adjacency, k=1).tocoo()
        e = np.column_stack([upper.row, upper.col]).astype(np.int64)
        return e[np.lexsort((e[:, 1], e[:, 0]))]

    def years(self) -> np.ndarray:
        """Per-node year, -1 where absent."""
        return np.array([m.year if m.year is not None else -1 for m in self.meta],
                        dtype=np.int64)

    def subgraph(self, nodes: Iterable[int]) -> "CitationGraph":
        """Induced subgraph on node indices; directed edges filtered accordingly."""
        keep = np.zeros(self.n_nodes, dtype=bool)
        keep[np.fromiter(nodes, dtype=np.int64)] = True
        new_index = np.cumsum(keep) - 1
        e = self.edges
        mask = keep[e[:, 0]] & keep[e[:, 1]] if len(e) else np.zeros(0, dtype=bool)
        sub_meta = [m for m, k in zip(self.meta, keep) if k]
        return CitationGraph.build(sub_meta, new_index[e[mask]])

    def without_edges(self, pairs) -> "CitationGraph":
        """Copy with every directed citation between each given pair removed (both orientations)."""
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        n = self.n_nodes
        drop = set((pairs[:, 0] * n + pairs[:, 1]).tolist())
        drop.update((pairs[:, 1] * n + pairs[:, 0]).tolist())
        codes = self.edges[:, 0] * n + self.edges[:, 1]
        mask = ~np.isin(codes, np.fromiter(drop, dtype=np.int64, count=len(drop)))
        return CitationGraph.build(list(self.meta), self.edges[mask])


def _symmetric_adjacency(edges: np.ndarray, n: int) -> sparse.csr_matrix:
    if len(edges):
        e = edges[edges[:, 0] != edges[:, 1]]
    else:
        e = edges
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    a = sparse.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
    a.sum_duplicates()
    a.data[:] = 1
    a.sort_indices()
    return a


def connected_components(g: CitationGraph) -> list:
    """Components as sorted index arrays, via breadth-first search."""
    n = g.n_nodes
    indptr, indices = g.adjacency.indptr, g.adjacency.indices
    comp = np.full(n, -1, dtype=np.int64)
    out = []
    for s in range(n):
        if comp[s] >= 0:
            continue
        cid = len(out)
        comp[s] = cid
        members = [s]
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in indices[indptr[u]:indptr[u + 1]]:
                if comp[v] < 0:
                    comp[v] = cid
                    members.append(int(v))
                    queue.append(v)
        out.append(np.sort(np.array(members, dtype=np.int64)))
    return out


def largest_connected_component(g: CitationGraph) -> CitationGraph:
    """Induced subgraph on the largest component; ties go to the component holding the smallest id."""
    if g.n_nodes == 0:
        raise ValueError("empty graph")
    comps = connected_components(g)
    # components are discovered in index order, so the first maximal one holds the smallest id
    best = max(comps, key=len)
    if len(best) == g.n_nodes:
        return g
    return g.subgraph(best)


def nodes_with_level_label(g: CitationGraph, depth: int) -> dict:
    """node_id -> frozenset of depth-level prefixes of all its codes (nodes without codes omitted)."""
    out = {}
    for m in g.meta:
        labels = frozenset(p for p in (c.prefix(depth) for c in m.codes) if p is not None)
        if labels:
            out[m.node_id] = labels
    return out


def primary_labels(g: CitationGraph, depth: int = 1) -> dict:
    """node_id -> depth-level prefix of the first-listed code."""
    out = {}
    for m in g.meta:
        c = m.primary_code
        if c is not None and c.prefix(depth) is not None:
            out[m.node_id] = c.prefix(depth)
    return out


# ---------------------------------------------------------------------------
# file IO
# ---------------------------------------------------------------------------

def _parse_codes(field_value: str, where: str) -> tuple:
    codes = []
    for raw in field_value.split(";"):
        raw = raw.strip()
        if not raw:
            continue
        try:
            codes.append(parse_code(raw))
        except ValueError:
            logger.warning("%s: rejected code %r", where, raw)
    return tuple(codes)


def read_metadata(path) -> list:
    path = Path(path)
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["node_id", "year", "codes"]:
            raise CorpusFormatError(path, 1, "expected header 'node_id,year,codes'")
        for row in reader:
            lineno = reader.line_num
            if not row:
                continue
            if len(row) != 3:
                raise CorpusFormatError(path, lineno, f"expected 3 fields, got {len(row)}")
            nid, year, codes = (c.strip() for c in row)
            if not nid:
                raise CorpusFormatError(path, lineno, "empty node_id")
            try:
                y = int(year) if year else None
            except ValueError:
                raise CorpusFormatError(path, lineno, f"bad year {year!r}") from None
            records.append(NodeMeta(nid, y, _parse_codes(codes, f"{path}:{lineno}")))
    return records


def read_edges(path) -> list:
    path = Path(path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
                raise CorpusFormatError(path, lineno, f"expected 'citing_id,cited_id', got {line!r}")
            out.append((parts[0].strip(), parts[1].strip()))
    return out


def load_corpus(edge_file, meta_file, strict: bool = False) -> CitationGraph:
    """Load an edge list and metadata CSV into a CitationGraph.

    In lenient mode (default) edge endpoints without a metadata row become
    nodes with empty metadata; in strict mode they raise CorpusFormatError.
    """
    meta = read_metadata(meta_file)
    index = {}
    for i, m in enumerate(meta):
        if m.node_id in index:
            raise ValueError(f"{meta_file}: duplicate node_id {m.node_id!r}")
        index[m.node_id] = i
    raw_edges = read_edges(edge_file)
    edges = np.empty((len(raw_edges), 2), dtype=np.int64)
    for k, (a, b) in enumerate(raw_edges):
        for col, nid in enumerate((a, b)):
            i = index.get(nid)
            if i is None:
                if strict:
                    raise CorpusFormatError(edge_file, k + 1, f"dangling node id {nid!r}")
                i = len(meta)
                meta.append(NodeMeta(nid))
                index[nid] = i
            edges[k, col] = i
    return CitationGraph.build(meta, edges)


def save_corpus(g: CitationGraph, edge_file, meta_file) -> None:
    """Write the two-file form, canonical order (lexicographic by id)."""
    with open(meta_file, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "year", "codes"])
        for m in g.meta:
            w.writerow([m.node_id, "" if m.year is None else m.year,
                        ";".join(c.raw for c in m.codes)])
    e = g.edges
    order = np.lexsort((e[:, 1], e[:, 0])) if len(e) else []
    with open(edge_file, "w", encoding="utf-8") as fh:
        for k in order:
            fh.write(f"{g.ids[e[k, 0]]},{g.ids[e[k, 1]]}\n")
