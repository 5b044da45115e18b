"""Undirected graphs from SNAP-style edge lists, and treated-neighbor fractions.

Graphs are stored in compressed sparse row form (``indptr`` / ``indices``).
Both arrays are made read-only on construction so a ``Graph`` can be shared
freely between threads.
"""

from __future__ import annotations

import io
import os
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, TextIO, Union

import numpy as np

from .errors import GraphParseError, ValidationError

_COMMENT_PREFIXES = ("#", "%")
_SEPARATORS = {
    "auto": re.compile(r"[,\s]+"),
    "whitespace": re.compile(r"\s+"),
    "comma": re.compile(r"\s*,\s*"),
}


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected simple graph on nodes ``0..n_nodes-1``."""

    n_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    node_ids: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def from_edges(cls, n_nodes: int, src, dst, node_ids=None) -> "Graph":
        """Build a graph from (possibly directed, duplicated) edge arrays.

        Edges are symmetrized, self-loops dropped and duplicates collapsed.
        """
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise ValidationError("src and dst must have the same length")
        if n_nodes < 0:
            raise ValidationError("n_nodes must be non-negative")
        if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n_nodes):
            raise ValidationError("edge endpoint out of range")

        keep = src != dst
        a = np.concatenate([src[keep], dst[keep]])
        b = np.concatenate([dst[keep], src[keep]])
        if a.size:
            key = np.unique(a * n_nodes + b)
            a, b = np.divmod(key, n_nodes)
        counts = np.bincount(a, minlength=n_nodes)
        indptr = np.zeros(n_nodes + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        if node_ids is not None:
            node_ids = _readonly(np.asarray(node_ids, dtype=np.int64).copy())
        return cls(int(n_nodes), _readonly(indptr), _readonly(b.astype(np.int64)), node_ids)

    @property
    def n_edges(self) -> int:
        return int(self.indices.size // 2)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    @property
    def adjacency(self) -> list[list[int]]:
        return [self.neighbors(i).tolist() for i in range(self.n_nodes)]

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n_nodes == other.n_nodes
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    def __hash__(self):
        return hash((self.n_nodes, self.indices.tobytes()))


def parse_edge_list(text: Union[str, TextIO, Iterable[str]], separator: str = "auto") -> Graph:
    """Parse a SNAP-style edge list.

    Lines starting with ``#`` or ``%`` are comments and blank lines are skipped.
    Only the first two columns are read; anything after them (weights,
    timestamps) is ignored. Node ids are remapped, in increasing order of the
    original id, to ``0..n-1``; the original ids are kept in ``node_ids``.

    ``separator`` is ``"auto"`` (whitespace or comma), ``"whitespace"`` or
    ``"comma"``.
    """
    try:
        splitter = _SEPARATORS[separator]
    except KeyError:
        raise ValidationError(f"unknown separator policy {separator!r}") from None
    if isinstance(text, str):
        text = io.StringIO(text)

    src: list[int] = []
    dst: list[int] = []
    for lineno, line in enumerate(text, start=1):
        line = line.strip()
        if not line or line.startswith(_COMMENT_PREFIXES):
            continue
        parts = splitter.split(line, maxsplit=2)
        if len(parts) < 2 or not parts[1]:
            raise GraphParseError(f"expected two node ids, got {line!r}", lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphParseError(f"non-integer node id in {line!r}", lineno) from None
        src.append(u)
        dst.append(v)

    if not src:
        raise GraphParseError("edge list contains no edges")

    raw = np.array([src, dst], dtype=np.int64)
    ids, dense = np.unique(raw, return_inverse=True)
    dense = dense.reshape(raw.shape)
    return Graph.from_edges(ids.size, dense[0], dense[1], node_ids=ids)


def load_edge_list(path: Union[str, os.PathLike], separator: str = "auto") -> Graph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_edge_list(fh, separator=separator)


def erdos_renyi(n_nodes: int, mean_degree: float, seed: int) -> Graph:
    """Seeded G(n, p) graph with ``p = mean_degree / (n_nodes - 1)``.

    The edge count is drawn from its binomial law and the edges are then
    sampled uniformly without replacement from the ``n(n-1)/2`` node pairs,
    so memory stays proportional to the number of edges.
    """
    if n_nodes < 2:
        raise ValidationError("an Erdos-Renyi graph needs at least two nodes")
    p = mean_degree / (n_nodes - 1)
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"mean degree {mean_degree} infeasible for {n_nodes} nodes")
    rng = np.random.default_rng(seed)
    total = n_nodes * (n_nodes - 1) // 2
    m = int(rng.binomial(total, p))
    k = np.sort(rng.choice(total, size=m, replace=False))
    i, j = _pair_from_index(k, n_nodes)
    return Graph.from_edges(n_nodes, i, j)


def _pair_from_index(k: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    # row-major enumeration of the strict upper triangle
    k = np.asarray(k, dtype=np.int64)
    i = n - 2 - np.floor(np.sqrt(-8.0 * k + 4.0 * n * (n - 1) - 7) / 2.0 - 0.5).astype(np.int64)
    # sqrt rounding can misplace k by one row at row boundaries
    i[k < i * (2 * n - i - 1) // 2] -= 1
    i[k >= (i + 1) * (2 * n - i - 2) // 2] += 1
    start = i * (2 * n - i - 1) // 2
    j = k - start + i + 1
    return i, j


def as_treatment(z, n_nodes: Optional[int] = None) -> np.ndarray:
    """Validate a 0/1 treatment vector and return it as an int8 array."""
    z = np.asarray(z)
    if z.ndim != 1:
        raise ValidationError("treatment vector must be one-dimensional")
    if n_nodes is not None and z.size != n_nodes:
        raise ValidationError(f"treatment vector has length {z.size}, expected {n_nodes}")
    if not np.all((z == 0) | (z == 1)):
        raise ValidationError("treatment entries must be 0 or 1")
    return z.astype(np.int8)


def treated_fraction(graph: Graph, z: Sequence[int]) -> np.ndarray:
    """Fraction of each node's neighbors that are treated; 0 for isolated nodes."""
    z = as_treatment(z, graph.n_nodes)
    csum = np.concatenate([[0.0], np.cumsum(z[graph.indices], dtype=np.float64)])
    treated = csum[graph.indptr[1:]] - csum[graph.indptr[:-1]]
    deg = graph.degrees
    g = np.zeros(graph.n_nodes, dtype=np.float64)
    nz = deg > 0
    g[nz] = treated[nz] / deg[nz]
    return g
