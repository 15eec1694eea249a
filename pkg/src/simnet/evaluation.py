"""Accuracy reports, stratified K-fold cross-validation, and diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .community import Partition, label_communities, louvain
from .dataset import Dataset
from .netgraph import SimilarityGraph, build_graph, degree_report
from .optimizer import (NoLabeledSamplesError, OptimizerConfig, derive_seed,
                        optimize_weights)
from .similarity import SimilarityTensor, WeightVector, build_similarity_tensor

UNLABELED = "Unlabeled"

# salts for derive_seed so the folds, the per-fold searches, and the
# per-fold prediction clusterings all draw from disjoint seed streams
_OPT_SALT, _PRED_SALT, _STRAT_SALT = 1, 2, 3


class StratificationError(ValueError):
    """A family has fewer labeled samples than there are folds."""

    def __init__(self, family: str, count: int, k: int):
        self.family = family
        self.count = count
        self.k = k
        super().__init__(
            f"family {family!r} has {count} labeled samples, fewer than k={k}")


@dataclass(frozen=True, eq=False)
class ClusteringReport:
    """Outcome of one classify run.

    ``confusion`` rows follow ``families`` (ground truth), columns follow
    ``columns`` = families + ("Unlabeled",).  ``predictions`` maps every
    labeled sample to its community's label.
    """

    accuracy: float
    families: tuple[str, ...]
    columns: tuple[str, ...]
    confusion: np.ndarray
    unlabeled_count: int
    no_connection_ids: tuple[str, ...]
    modularity: float
    weights: WeightVector
    threshold: float
    predictions: dict[str, str]
    error_ids: tuple[str, ...]

    def confusion_dict(self) -> dict[str, dict[str, int]]:
        return {fam: {col: int(self.confusion[i, j])
                      for j, col in enumerate(self.columns)}
                for i, fam in enumerate(self.families)}


def report_from_partition(g: SimilarityGraph, p: Partition,
                          ds: Dataset) -> ClusteringReport:
    """Score an already-labeled partition against ground truth."""
    labeled = ds.labeled_ids
    if not labeled:
        raise NoLabeledSamplesError("dataset has no labeled samples")
    families = ds.families
    columns = families + (UNLABELED,)
    col_idx = {c: j for j, c in enumerate(columns)}
    row_idx = {f: i for i, f in enumerate(families)}
    confusion = np.zeros((len(families), len(columns)), dtype=np.int64)
    predictions: dict[str, str] = {}
    error_ids = []
    for nid in labeled:
        fam = ds[nid].family
        lab = p.community_labels[int(p.membership[ds.index_of(nid)])]
        pred = lab if lab is not None else UNLABELED
        predictions[nid] = pred
        confusion[row_idx[fam], col_idx[pred]] += 1
        if pred != fam:
            error_ids.append(nid)
    correct = int(sum(confusion[i, col_idx[f]] for i, f in enumerate(families)))
    return ClusteringReport(
        accuracy=correct / len(labeled),
        families=families,
        columns=columns,
        confusion=confusion,
        unlabeled_count=int(confusion[:, col_idx[UNLABELED]].sum()),
        no_connection_ids=degree_report(g).isolated,
        modularity=p.modularity,
        weights=g.weights_used,
        threshold=g.threshold,
        predictions=predictions,
        error_ids=tuple(error_ids),
    )


def classify(t: SimilarityTensor, ds: Dataset, w: WeightVector,
             threshold: float, seed: int) -> ClusteringReport:
    """Full pipeline on one weight vector: graph, Louvain, labels, report."""
    g = build_graph(t, w, threshold)
    p = label_communities(louvain(g, seed), ds, voters=ds.labeled_ids)
    return report_from_partition(g, p, ds)


@dataclass(frozen=True)
class FoldResult:
    fold: int
    classification_accuracy: float
    prediction_accuracy: float
    weights: WeightVector


@dataclass(frozen=True)
class CrossValReport:
    k: int
    per_fold: tuple[FoldResult, ...]
    mean_prediction_accuracy: float


def stratified_folds(ds: Dataset, k: int, seed: int) -> tuple[tuple[str, ...], ...]:
    """Partition the labeled ids into k family-stratified folds.

    Every family's samples are shuffled (seeded) and dealt round-robin, so
    per-family fold counts differ by at most one.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    for fam, count in ds.label_census().items():
        if count < k:
            raise StratificationError(fam, count, k)
    rng = np.random.default_rng(derive_seed(seed, _STRAT_SALT))
    folds: list[list[str]] = [[] for _ in range(k)]
    for fam in ds.families:
        ids = [sid for sid in ds.labeled_ids if ds[sid].family == fam]
        for pos, idx in enumerate(rng.permutation(len(ids))):
            folds[pos % k].append(ids[idx])
    return tuple(tuple(f) for f in folds)


def kfold_crossval(ds: Dataset, k: int, cfg: OptimizerConfig,
                   tensor: SimilarityTensor | None = None) -> CrossValReport:
    """Stratified K-fold: learn weights on training samples, predict the rest.

    Per fold, weights are optimized on the training-only sub-tensor; the
    prediction graph then spans training and test nodes together, but only
    training nodes vote when communities are labeled.  A test node whose
    community is Unlabeled counts as a miss.
    """
    folds = stratified_folds(ds, k, cfg.seed)
    if tensor is None:
        tensor = build_similarity_tensor(ds)
    elif tensor.sample_order != ds.ids:
        raise ValueError("tensor sample_order does not match dataset order")
    per_fold = []
    for f, test_ids in enumerate(folds):
        test_set = set(test_ids)
        train_idx = [i for i, sid in enumerate(ds.ids) if sid not in test_set]
        sub_ds = ds.subset(ds.ids[i] for i in train_idx)
        sub_t = tensor.subset(train_idx)
        fold_cfg = replace(cfg, seed=derive_seed(cfg.seed, _OPT_SALT, f))
        trace = optimize_weights(sub_t, sub_ds, fold_cfg)

        g = build_graph(tensor, trace.best_weights, cfg.threshold)
        p = louvain(g, derive_seed(cfg.seed, _PRED_SALT, f))
        voters = tuple(sid for sid in ds.labeled_ids if sid not in test_set)
        p = label_communities(p, ds, voters)
        correct = 0
        for sid in test_ids:
            lab = p.community_labels[int(p.membership[ds.index_of(sid)])]
            if lab == ds[sid].family:
                correct += 1
        per_fold.append(FoldResult(
            fold=f,
            classification_accuracy=1.0 - trace.best_error,
            prediction_accuracy=correct / len(test_ids),
            weights=trace.best_weights,
        ))
    mean = sum(r.prediction_accuracy for r in per_fold) / k
    return CrossValReport(k, tuple(per_fold), mean)


@dataclass(frozen=True)
class UnlabeledBreakdown:
    threshold: float
    errors: int
    unlabeled_errors: int
    no_connection_errors: int

    @property
    def unlabeled_fraction(self) -> float:
        return self.unlabeled_errors / self.errors if self.errors else 0.0

    @property
    def no_connection_fraction(self) -> float:
        return self.no_connection_errors / self.errors if self.errors else 0.0


def unlabeled_report(reports, known_no_connection) -> tuple[UnlabeledBreakdown, ...]:
    """Attribute each report's errors to Unlabeled communities / known isolates."""
    known = set(known_no_connection)
    out = []
    for r in reports:
        unl = sum(1 for nid in r.error_ids if r.predictions[nid] == UNLABELED)
        noconn = sum(1 for nid in r.error_ids if nid in known)
        out.append(UnlabeledBreakdown(r.threshold, len(r.error_ids), unl, noconn))
    return tuple(out)
