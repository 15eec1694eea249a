"""Louvain community detection and majority-vote community labeling.

Two phases, repeated until a level yields no move: greedy local moves in
seeded-shuffled node order (a move is kept only if it strictly increases
modularity), then aggregation of communities into super-nodes whose
intra-community weight becomes a self-loop.

The hot path lives in a numba kernel over CSR arrays because weight
optimization runs Louvain thousands of times per search.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

try:
    from numba import njit
except ImportError:  # plain-python fallback; identical results, just slower
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f

from .dataset import Dataset
from .netgraph import SimilarityGraph


class ModularityUndefinedError(ValueError):
    """Raised when modularity is requested on a graph with no edges."""


@dataclass(frozen=True)
class LevelTrace:
    """One level's graph, sweep order, and accepted moves, for auditing."""

    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    self_weight: np.ndarray
    order: np.ndarray
    moves: np.ndarray          # rows of (node, from_community, to_community)
    final_membership: np.ndarray


@dataclass(frozen=True, eq=False)
class Partition:
    """A community assignment over a graph's nodes."""

    node_ids: tuple[str, ...]
    membership: np.ndarray     # community id per node, aligned with node_ids
    modularity: float
    community_labels: dict[int, str | None]
    level_count: int
    trace: tuple[LevelTrace, ...] | None = field(default=None, repr=False)

    @property
    def assignment(self) -> dict[str, int]:
        return {nid: int(c) for nid, c in zip(self.node_ids, self.membership)}

    @property
    def n_communities(self) -> int:
        return int(self.membership.max()) + 1 if len(self.membership) else 0

    def communities(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {}
        for nid, c in zip(self.node_ids, self.membership):
            out.setdefault(int(c), []).append(nid)
        return out


def _weighted_degrees(n: int, src, dst, w, self_w=None) -> np.ndarray:
    # astype: bincount on empty input comes back int64 even with weights
    k = (np.bincount(src, weights=w, minlength=n)
         + np.bincount(dst, weights=w, minlength=n)).astype(np.float64)
    if self_w is not None:
        k += 2.0 * self_w
    return k


def _q_arrays(n: int, src, dst, w, self_w, comm) -> float:
    """Modularity of an assignment on edge arrays (self-loops allowed)."""
    m = float(w.sum()) + (float(self_w.sum()) if self_w is not None else 0.0)
    k = _weighted_degrees(n, src, dst, w, self_w)
    w_in = float(w[comm[src] == comm[dst]].sum())
    if self_w is not None:
        w_in += float(self_w.sum())
    s_c = np.bincount(comm, weights=k)
    return w_in / m - float(((s_c / (2.0 * m)) ** 2).sum())


def modularity(g: SimilarityGraph, assignment: Mapping[str, int]) -> float:
    """Q = (1/2m) Σij [Aij − ki·kj/2m] δ(ci, cj), on edge weights."""
    if g.edge_count == 0:
        raise ModularityUndefinedError("modularity is undefined on an edgeless graph")
    comm = np.array([assignment[nid] for nid in g.node_ids], dtype=np.int64)
    return _q_arrays(g.n, g.src, g.dst, g.weight, None, _canonical(comm))


# ---------------------------------------------------------------------------
# Louvain internals
# ---------------------------------------------------------------------------

@njit(cache=True)
def _fill_csr(src, dst, w, indptr, indices, weights):
    cursor = indptr[:-1].copy()
    for e in range(src.shape[0]):
        i, j = src[e], dst[e]
        ci = cursor[i]
        indices[ci] = j
        weights[ci] = w[e]
        cursor[i] = ci + 1
        cj = cursor[j]
        indices[cj] = i
        weights[cj] = w[e]
        cursor[j] = cj + 1


def _build_csr(n: int, src, dst, w):
    deg = np.bincount(src, minlength=n) + np.bincount(dst, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(deg, out=indptr[1:])
    indices = np.empty(indptr[-1], dtype=np.int64)
    weights = np.empty(indptr[-1], dtype=np.float64)
    if src.shape[0]:
        _fill_csr(src, dst, w, indptr, indices, weights)
    return indptr, indices, weights


@njit(cache=True)
def _local_moves(indptr, indices, weights, k, m, order, comm, comm_tot,
                 moves, max_moves):
    """Sweep nodes in `order` until a full pass moves nothing.

    A node joins the neighbouring community with the largest gain
    k_x_in(C) − Σtot(C)·k_x/2m (evaluated with the node removed); staying
    put wins ties, so only strict modularity increases are accepted.
    Every accepted move is logged; returns the move count, or -1 if the
    log buffer is full.
    """
    n = comm.shape[0]
    comm_w = np.zeros(n, dtype=np.float64)   # edge weight from x into each community
    touched = np.empty(n, dtype=np.int64)
    two_m = 2.0 * m
    n_moves = 0
    moved = True
    while moved:
        moved = False
        for oi in range(n):
            x = order[oi]
            cx = comm[x]
            n_touched = 0
            for e in range(indptr[x], indptr[x + 1]):
                y = indices[e]
                if y == x:
                    continue
                cy = comm[y]
                if comm_w[cy] == 0.0:
                    touched[n_touched] = cy
                    n_touched += 1
                comm_w[cy] += weights[e]
            comm_tot[cx] -= k[x]
            best_c = cx
            best_gain = comm_w[cx] - comm_tot[cx] * k[x] / two_m
            for t in range(n_touched):
                c = touched[t]
                if c == cx:
                    continue
                gain = comm_w[c] - comm_tot[c] * k[x] / two_m
                if gain > best_gain:
                    best_gain = gain
                    best_c = c
            comm_tot[best_c] += k[x]
            if best_c != cx:
                if n_moves >= max_moves:
                    return -1
                comm[x] = best_c
                moves[n_moves, 0] = x
                moves[n_moves, 1] = cx
                moves[n_moves, 2] = best_c
                n_moves += 1
                moved = True
            for t in range(n_touched):
                comm_w[touched[t]] = 0.0
    return n_moves


def _run_level(n, src, dst, w, self_w, order):
    indptr, indices, weights = _build_csr(n, src, dst, w)
    k = _weighted_degrees(n, src, dst, w, self_w)
    m = float(w.sum()) + float(self_w.sum())
    comm = np.arange(n, dtype=np.int64)
    comm_tot = k.copy()
    cap = max(64, 8 * n)
    while True:
        moves = np.empty((cap, 3), dtype=np.int64)
        n_moves = _local_moves(indptr, indices, weights, k, m, order,
                               comm, comm_tot, moves, cap)
        if n_moves >= 0:
            return comm, moves[:n_moves]
        comm = np.arange(n, dtype=np.int64)   # buffer overflowed: redo bigger
        comm_tot = k.copy()
        cap *= 4


def _aggregate(src, dst, w, self_w, comm, n_comms):
    """Collapse communities to super-nodes; intra weight becomes self-loops."""
    cu, cv = comm[src], comm[dst]
    lo, hi = np.minimum(cu, cv), np.maximum(cu, cv)
    intra = lo == hi
    new_self = np.bincount(comm, weights=self_w, minlength=n_comms)
    if intra.any():
        new_self += np.bincount(lo[intra], weights=w[intra], minlength=n_comms)
    keep = ~intra
    key = lo[keep] * np.int64(n_comms) + hi[keep]
    uniq, inv = np.unique(key, return_inverse=True)
    agg_w = np.bincount(inv, weights=w[keep])
    return uniq // n_comms, uniq % n_comms, agg_w, new_self


def _canonical(membership: np.ndarray) -> np.ndarray:
    """Renumber community ids to 0.. in order of first appearance."""
    uniq, first, inv = np.unique(membership, return_index=True, return_inverse=True)
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(uniq))
    return rank[inv]


def louvain(g: SimilarityGraph, seed: int, track: bool = False) -> Partition:
    """Two-phase Louvain on a similarity graph.

    Deterministic for a given (graph, seed): node sweep order is one
    seeded shuffle per level.  An edgeless graph comes back as all
    singletons with modularity reported as 0.  With ``track`` the
    returned partition carries per-level move logs for auditing.
    """
    n = g.n
    if n == 0:
        raise ValueError("graph has no nodes")
    if g.edge_count == 0:
        return Partition(g.node_ids, np.arange(n, dtype=np.int64), 0.0,
                         {c: None for c in range(n)}, 0,
                         trace=() if track else None)

    rng = np.random.default_rng(seed % (2 ** 64))
    src = g.src.astype(np.int64)
    dst = g.dst.astype(np.int64)
    w = g.weight.astype(np.float64)
    self_w = np.zeros(n, dtype=np.float64)
    membership = np.arange(n, dtype=np.int64)
    levels: list[LevelTrace] = []
    level_count = 0
    n_lv = n
    while True:
        order = rng.permutation(n_lv).astype(np.int64)
        comm, moves = _run_level(n_lv, src, dst, w, self_w, order)
        if track:
            levels.append(LevelTrace(src.copy(), dst.copy(), w.copy(),
                                     self_w.copy(), order, moves, comm.copy()))
        if len(moves) == 0:
            break
        comm = _canonical(comm)
        n_comms = int(comm.max()) + 1
        membership = comm[membership]
        src, dst, w, self_w = _aggregate(src, dst, w, self_w, comm, n_comms)
        level_count += 1
        n_lv = n_comms

    membership = _canonical(membership)
    q = _q_arrays(n, g.src, g.dst, g.weight, None, membership)
    labels: dict[int, str | None] = {c: None for c in range(int(membership.max()) + 1)}
    return Partition(g.node_ids, membership, q, labels, level_count,
                     trace=tuple(levels) if track else None)


# ---------------------------------------------------------------------------
# Labeling
# ---------------------------------------------------------------------------

def plurality_label_codes(membership, sizes, node_codes, voter_mask,
                          n_comms: int) -> np.ndarray:
    """Per-community plurality of voter family codes.

    -1 where a community is a singleton or has no voters; ties go to the
    smallest code.
    """
    lab = np.full(n_comms, -1, dtype=np.int64)
    vm = voter_mask & (node_codes >= 0)
    if vm.any():
        n_fams = int(node_codes[vm].max()) + 1
        key = membership[vm] * np.int64(n_fams) + node_codes[vm]
        pairs, counts = np.unique(key, return_counts=True)
        cs, fs = pairs // n_fams, pairs % n_fams
        order = np.lexsort((fs, -counts, cs))
        firsts = np.ones(len(order), dtype=bool)
        firsts[1:] = cs[order][1:] != cs[order][:-1]
        lab[cs[order][firsts]] = fs[order][firsts]
    lab[sizes <= 1] = -1
    return lab


def label_communities(p: Partition, ds: Dataset, voters: Iterable[str]) -> Partition:
    """Label each community with the plurality family among its voters.

    Singleton communities and communities with no voters stay unlabeled
    (None); plurality ties break to the lexicographically smallest family.
    """
    voter_set = set(voters)
    unknown = voter_set.difference(ds.ids)
    if unknown:
        raise KeyError(f"voters not in dataset: {sorted(unknown)[:5]}")
    families = ds.families
    fam_code = {f: i for i, f in enumerate(families)}
    node_codes = np.empty(len(p.node_ids), dtype=np.int64)
    voter_mask = np.zeros(len(p.node_ids), dtype=bool)
    for i, nid in enumerate(p.node_ids):
        fam = ds[nid].family
        node_codes[i] = fam_code[fam] if fam is not None else -1
        voter_mask[i] = nid in voter_set
    n_comms = p.n_communities
    sizes = np.bincount(p.membership, minlength=n_comms)
    codes = plurality_label_codes(p.membership, sizes, node_codes, voter_mask, n_comms)
    labels = {c: (families[code] if code >= 0 else None)
              for c, code in enumerate(codes)}
    return replace(p, community_labels=labels)
