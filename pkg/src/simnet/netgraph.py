"""Thresholded weighted similarity network built from a tensor."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from .similarity import SimilarityTensor, WeightVector, fused_matrix


@dataclass(frozen=True, eq=False)
class SimilarityGraph:
    """Undirected weighted graph; node k is sample node_ids[k].

    Edges are stored as parallel arrays with src < dst; every weight is the
    fused similarity of the pair and strictly exceeds the threshold.
    """

    node_ids: tuple[str, ...]
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    threshold: float
    weights_used: WeightVector

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @property
    def edge_count(self) -> int:
        return int(self.src.shape[0])

    def edges(self) -> Iterator[tuple[int, int, float]]:
        for i, j, w in zip(self.src, self.dst, self.weight):
            yield int(i), int(j), float(w)

    def degrees(self) -> np.ndarray:
        return (np.bincount(self.src, minlength=self.n)
                + np.bincount(self.dst, minlength=self.n))

    @classmethod
    def from_edges(cls, node_ids, edge_list, threshold: float = 0.0,
                   weights_used: WeightVector | None = None) -> "SimilarityGraph":
        """Build a graph directly from (i, j, weight) triples (test fixtures)."""
        node_ids = tuple(node_ids)
        n = len(node_ids)
        seen = set()
        src, dst, wt = [], [], []
        for i, j, w in edge_list:
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            i, j = (i, j) if i < j else (j, i)
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) out of range")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            if not (threshold < w <= 1.0):
                raise ValueError(f"edge weight {w} outside ({threshold}, 1]")
            seen.add((i, j))
            src.append(i)
            dst.append(j)
            wt.append(w)
        return cls(node_ids, np.array(src, dtype=np.int64),
                   np.array(dst, dtype=np.int64), np.array(wt, dtype=np.float64),
                   float(threshold), weights_used or WeightVector.equal())


@lru_cache(maxsize=8)
def _triu_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    iu, ju = np.triu_indices(n, k=1)
    return iu.astype(np.int64), ju.astype(np.int64)


def build_graph(t: SimilarityTensor, w: WeightVector,
                threshold: float) -> SimilarityGraph:
    """Connect every pair whose fused similarity strictly exceeds threshold.

    Isolated nodes stay in the node list; at threshold 1.0 the graph is
    necessarily edgeless.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    fs = fused_matrix(t, w)
    iu, ju = _triu_pairs(t.n)
    vals = fs[iu, ju]
    mask = vals > threshold
    return SimilarityGraph(t.sample_order, iu[mask], ju[mask],
                           vals[mask], threshold, w)


@dataclass(frozen=True)
class DegreeReport:
    degrees: dict[str, int]
    isolated: tuple[str, ...]


def degree_report(g: SimilarityGraph) -> DegreeReport:
    """Per-node degrees plus the degree-0 (no-connection) node list."""
    deg = g.degrees()
    degrees = {nid: int(d) for nid, d in zip(g.node_ids, deg)}
    isolated = tuple(nid for nid, d in zip(g.node_ids, deg) if d == 0)
    return DegreeReport(degrees, isolated)
