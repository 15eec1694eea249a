"""Command-line front door: generate/ingest data, build tensors, cluster,
optimize, sweep, cross-validate, and export viewer-ready graph files.

Exit codes: 0 success, 1 usage error, 2 data error, 3 pipeline error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from .community import Partition, label_communities, louvain
from .dataset import Dataset, DatasetError, generate_planted, load_dataset, save_dataset
from .evaluation import (ClusteringReport, classify, kfold_crossval,
                         report_from_partition)
from .netgraph import SimilarityGraph, build_graph
from .optimizer import (OptimizerConfig, OptimizerTrace, derive_seed,
                        optimize_weights, threshold_sweep)
from .similarity import (FEATURES, SimilarityTensor, WeightVector,
                         build_similarity_tensor)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PIPELINE = 3

_CLASSIFY_SALT = 5  # final-classification Louvain seed, distinct from fold salts


class PipelineError(Exception):
    """A pipeline stage failed; message names the stage."""

    def __init__(self, stage: str, reason: str):
        self.stage = stage
        super().__init__(f"{stage}: {reason}")


@dataclass(frozen=True)
class RunConfig:
    """Knobs of a full pipeline run."""

    dataset_path: Path
    threshold_percent: float = 90.0
    iterations: int = 1000
    learning_rate: float = 0.05
    k_folds: int = 5
    seed: int = 0
    output_dir: Path = Path(".")
    cache_path: Path | None = None
    skip_invalid: bool = False

    def __post_init__(self):
        if not 0.0 <= self.threshold_percent <= 100.0:
            raise ValueError("threshold must resolve to 0-100 percent")
        if self.iterations < 1 or self.k_folds < 1:
            raise ValueError("iterations and k must be >= 1")

    @property
    def threshold(self) -> float:
        return self.threshold_percent / 100.0


def parse_threshold(text: str) -> float:
    """Threshold in percent.  Values above 1 are percent (90); values up to
    1 are unit fractions (0.9) and get scaled."""
    value = float(text)
    if value < 0.0:
        raise ValueError(f"threshold cannot be negative: {text}")
    percent = value * 100.0 if value <= 1.0 else value
    if percent > 100.0:
        raise ValueError(f"threshold out of range: {text}")
    return percent


def parse_weights(text: str) -> WeightVector:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 4:
        raise ValueError("expected four comma-separated weights "
                         "(api,permission,activity,file)")
    return WeightVector(*parts)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the CLI contract reserves 2 for
    # data errors, so route usage problems to exit code 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _json_dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _load(args) -> Dataset:
    path = Path(args.dataset)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    return load_dataset(path, skip_invalid=getattr(args, "skip_invalid", False))


def _tensor(ds: Dataset, cache: str | None) -> SimilarityTensor:
    if cache:
        cache_path = Path(cache)
        if cache_path.exists():
            t = SimilarityTensor.load(cache_path)
            if t.sample_order == ds.ids:
                log.info("loaded tensor cache %s", cache_path)
                return t
            log.warning("tensor cache %s does not match dataset; rebuilding",
                        cache_path)
        t = build_similarity_tensor(ds)
        t.save(cache_path)
        return t
    return build_similarity_tensor(ds)


def _report_payload(report: ClusteringReport, ds: Dataset) -> dict:
    return {
        "accuracy": report.accuracy,
        "threshold": report.threshold,
        "weights": report.weights.as_dict(),
        "modularity": report.modularity,
        "unlabeled_count": report.unlabeled_count,
        "no_connection_ids": list(report.no_connection_ids),
        "families": list(report.families),
        "confusion": report.confusion_dict(),
        "label_census": ds.label_census(),
    }


def _report_text(report: ClusteringReport) -> str:
    lines = [
        f"accuracy     {report.accuracy:.4f}",
        f"modularity   {report.modularity:.4f}",
        f"threshold    {report.threshold:.2f}",
        f"unlabeled    {report.unlabeled_count}",
        f"isolated     {len(report.no_connection_ids)}",
        "weights      " + "  ".join(
            f"{name}={val:.4f}" for name, val in report.weights.as_dict().items()),
        "",
    ]
    width = max(len(f) for f in report.columns) + 2
    header = " " * width + "".join(c.rjust(width) for c in report.columns)
    lines.append(header)
    for i, fam in enumerate(report.families):
        row = fam.ljust(width) + "".join(
            str(int(v)).rjust(width) for v in report.confusion[i])
        lines.append(row)
    return "\n".join(lines) + "\n"


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def cmd_export_graph(g: SimilarityGraph, p: Partition, ds: Dataset,
                     path, accuracy: float | None = None) -> None:
    """Write the graph as force-layout-ready JSON plus a DOT sibling file.

    JSON: nodes [{id, family, community, predicted_label, degree}],
    links [{source, target, weight}], meta {weights, threshold,
    modularity, accuracy}.
    """
    path = Path(path)
    deg = g.degrees()
    nodes = []
    for i, nid in enumerate(g.node_ids):
        lab = p.community_labels[int(p.membership[i])]
        nodes.append({
            "id": nid,
            "family": ds[nid].family,
            "community": int(p.membership[i]),
            "predicted_label": lab if lab is not None else "Unlabeled",
            "degree": int(deg[i]),
        })
    links = [{"source": g.node_ids[i], "target": g.node_ids[j], "weight": w}
             for i, j, w in g.edges()]
    meta = {
        "weights": g.weights_used.as_dict(),
        "threshold": g.threshold,
        "modularity": p.modularity,
        "accuracy": accuracy,
    }
    _json_dump({"nodes": nodes, "links": links, "meta": meta}, path)

    dot_path = path.with_suffix(".dot")
    out = ["graph simnet {"]
    for node in nodes:
        out.append(
            '  "{id}" [family="{family}", community={community}, '
            'predicted="{predicted}", degree={degree}];'.format(
                id=_dot_escape(node["id"]),
                family=_dot_escape(node["family"] or ""),
                community=node["community"],
                predicted=_dot_escape(node["predicted_label"]),
                degree=node["degree"]))
    for link in links:
        out.append('  "{s}" -- "{t}" [weight={w:.6f}];'.format(
            s=_dot_escape(link["source"]), t=_dot_escape(link["target"]),
            w=link["weight"]))
    out.append("}")
    dot_path.write_text("\n".join(out) + "\n", encoding="utf-8")


def _trace_lines(trace: OptimizerTrace) -> str:
    lines = []
    for e in trace.history:
        lines.append(json.dumps({
            "iteration": e.iteration,
            "weights": list(e.weights.as_tuple()),
            "error": e.error,
            "accepted": e.accepted,
        }, sort_keys=True))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    ds = generate_planted(args.families, args.per_family, args.mutation_rate,
                          args.seed)
    save_dataset(ds, Path(args.out))
    print(f"wrote {len(ds)} samples ({args.families} families) to {args.out}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    ds = _load(args)
    payload = {
        "samples": len(ds),
        "labeled": len(ds.labeled_ids),
        "families": ds.label_census(),
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_similarity(args) -> int:
    ds = _load(args)
    t = _tensor(ds, args.cache)
    stats = {name: {"mean": round(float(m.mean()), 6),
                    "min": round(float(m.min()), 6)}
             for name, m in zip(FEATURES, t.matrices())}
    print(json.dumps({"n": t.n, "features": stats}, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_cluster(args) -> int:
    ds = _load(args)
    t = _tensor(ds, args.cache)
    report = classify(t, ds, args.weights, args.threshold / 100.0, args.seed)
    print(_report_text(report), end="")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        _json_dump(_report_payload(report, ds), out_dir / "report.json")
    return EXIT_OK


def cmd_optimize(args) -> int:
    ds = _load(args)
    t = _tensor(ds, args.cache)
    cfg = OptimizerConfig(iterations=args.iterations, learning_rate=args.lr,
                          threshold=args.threshold / 100.0, seed=args.seed)
    trace = optimize_weights(t, ds, cfg)
    print(f"best_error {trace.best_error:.4f}  accuracy {1 - trace.best_error:.4f}")
    print("weights " + "  ".join(
        f"{k}={v:.4f}" for k, v in trace.best_weights.as_dict().items()))
    if args.out:
        Path(args.out).write_text(_trace_lines(trace), encoding="utf-8")
    return EXIT_OK


def cmd_sweep(args) -> int:
    ds = _load(args)
    t = _tensor(ds, args.cache)
    cfg = OptimizerConfig(iterations=args.iterations, learning_rate=args.lr,
                          seed=args.seed)
    thresholds = [p / 100.0 for p in args.thresholds]
    report = threshold_sweep(t, ds, cfg, thresholds)
    for pt in report.points:
        print(f"threshold {pt.threshold * 100:5.1f}  accuracy {pt.accuracy:.4f}")
    print(f"best threshold {report.best_threshold * 100:.1f}")
    if args.out:
        payload = {
            "best_threshold_percent": report.best_threshold * 100.0,
            "points": [{
                "threshold_percent": pt.threshold * 100.0,
                "accuracy": pt.accuracy,
                "weights": pt.best_weights.as_dict(),
            } for pt in report.points],
        }
        _json_dump(payload, Path(args.out))
    return EXIT_OK


def cmd_crossval(args) -> int:
    ds = _load(args)
    t = _tensor(ds, args.cache)
    cfg = OptimizerConfig(iterations=args.iterations, learning_rate=args.lr,
                          threshold=args.threshold / 100.0, seed=args.seed)
    report = kfold_crossval(ds, args.k, cfg, tensor=t)
    for fr in report.per_fold:
        print(f"fold {fr.fold}  classification {fr.classification_accuracy:.4f}"
              f"  prediction {fr.prediction_accuracy:.4f}")
    print(f"mean prediction accuracy {report.mean_prediction_accuracy:.4f}")
    if args.out:
        payload = {
            "k": report.k,
            "mean_prediction_accuracy": report.mean_prediction_accuracy,
            "folds": [{
                "fold": fr.fold,
                "classification_accuracy": fr.classification_accuracy,
                "prediction_accuracy": fr.prediction_accuracy,
                "weights": fr.weights.as_dict(),
            } for fr in report.per_fold],
        }
        _json_dump(payload, Path(args.out))
    return EXIT_OK


def cmd_export(args) -> int:
    ds = _load(args)
    t = _tensor(ds, args.cache)
    g = build_graph(t, args.weights, args.threshold / 100.0)
    p = label_communities(louvain(g, args.seed), ds, voters=ds.labeled_ids)
    accuracy = None
    if ds.labeled_ids:
        accuracy = report_from_partition(g, p, ds).accuracy
    cmd_export_graph(g, p, ds, Path(args.out), accuracy=accuracy)
    print(f"wrote {args.out} and {Path(args.out).with_suffix('.dot')}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = RunConfig(
        dataset_path=Path(args.dataset),
        threshold_percent=args.threshold,
        iterations=args.iterations,
        learning_rate=args.lr,
        seed=args.seed,
        output_dir=Path(args.out),
        cache_path=Path(args.cache) if args.cache else None,
        skip_invalid=args.skip_invalid,
    )
    return run_pipeline(cfg)


def run_pipeline(cfg: RunConfig) -> int:
    """ingest → tensor → optimize → classify → export, into output_dir."""
    if not cfg.dataset_path.exists():
        raise DatasetError(f"dataset file not found: {cfg.dataset_path}")
    ds = load_dataset(cfg.dataset_path, skip_invalid=cfg.skip_invalid)

    try:
        t = _tensor(ds, str(cfg.cache_path) if cfg.cache_path else None)
    except (OSError, ValueError) as e:
        raise PipelineError("similarity", str(e)) from e

    opt_cfg = OptimizerConfig(iterations=cfg.iterations,
                              learning_rate=cfg.learning_rate,
                              threshold=cfg.threshold, seed=cfg.seed)
    try:
        trace = optimize_weights(t, ds, opt_cfg)
    except ValueError as e:
        raise PipelineError("optimize", str(e)) from e

    try:
        g = build_graph(t, trace.best_weights, cfg.threshold)
        p = label_communities(louvain(g, derive_seed(cfg.seed, _CLASSIFY_SALT)),
                              ds, voters=ds.labeled_ids)
        report = report_from_partition(g, p, ds)
    except ValueError as e:
        raise PipelineError("classify", str(e)) from e

    try:
        out = cfg.output_dir
        out.mkdir(parents=True, exist_ok=True)
        _json_dump(_report_payload(report, ds), out / "report.json")
        (out / "report.txt").write_text(_report_text(report), encoding="utf-8")
        (out / "trace.jsonl").write_text(_trace_lines(trace), encoding="utf-8")
        cmd_export_graph(g, p, ds, out / "graph.json", accuracy=report.accuracy)
    except OSError as e:
        raise PipelineError("export", str(e)) from e

    print(f"accuracy   {report.accuracy:.4f}")
    print("weights    " + "  ".join(
        f"{k}={v:.4f}" for k, v in trace.best_weights.as_dict().items()))
    print(f"modularity {report.modularity:.4f}")
    print(f"artifacts  {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _threshold_arg(text: str) -> float:
    try:
        return parse_threshold(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def _weights_arg(text: str) -> WeightVector:
    try:
        return parse_weights(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def _threshold_list_arg(text: str) -> list[float]:
    """'80-95' or '80,85,90' in percent."""
    try:
        if "-" in text and "," not in text:
            lo, hi = text.split("-", 1)
            lo_p, hi_p = parse_threshold(lo), parse_threshold(hi)
            if hi_p < lo_p:
                raise ValueError(f"empty threshold range: {text}")
            return [float(p) for p in range(int(lo_p), int(hi_p) + 1)]
        return [parse_threshold(p) for p in text.split(",")]
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def _add_common(sub, cache: bool = True):
    sub.add_argument("--dataset", required=True, help="JSONL dataset path")
    sub.add_argument("--skip-invalid", action="store_true",
                     help="drop malformed records instead of failing")
    if cache:
        sub.add_argument("--cache", default=None,
                         help="tensor cache file (created if absent)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="simnet",
                     description="Similarity-network family classification")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a planted-family dataset")
    p.add_argument("--families", type=int, default=8)
    p.add_argument("--per-family", type=int, default=50)
    p.add_argument("--mutation-rate", type=float, default=0.10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ingest", help="validate a dataset and print its census")
    _add_common(p, cache=False)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("similarity", help="build (and cache) the similarity tensor")
    _add_common(p)
    p.set_defaults(func=cmd_similarity)

    p = sub.add_parser("cluster", help="cluster at fixed weights and report")
    _add_common(p)
    p.add_argument("--threshold", type=_threshold_arg, default=90.0,
                   help="percent (90) or fraction (0.9)")
    p.add_argument("--weights", type=_weights_arg,
                   default=WeightVector.equal(),
                   help="api,permission,activity,file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="directory for report.json")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("optimize", help="learn fusion weights")
    _add_common(p)
    p.add_argument("--threshold", type=_threshold_arg, default=90.0)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="trace JSONL path")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="optimize independently per threshold")
    _add_common(p)
    p.add_argument("--thresholds", type=_threshold_list_arg,
                   default=[float(pct) for pct in range(80, 96)],
                   help="range '80-95' or list '80,85,90' (default 80-95)")
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="sweep report JSON path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("crossval", help="stratified K-fold prediction accuracy")
    _add_common(p)
    p.add_argument("--threshold", type=_threshold_arg, default=90.0)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="crossval report JSON path")
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("export", help="write force-layout JSON + DOT files")
    _add_common(p)
    p.add_argument("--threshold", type=_threshold_arg, default=90.0)
    p.add_argument("--weights", type=_weights_arg,
                   default=WeightVector.equal())
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="graph JSON path")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("pipeline",
                       help="ingest, optimize, classify, export in one run")
    _add_common(p)
    p.add_argument("--threshold", type=_threshold_arg, default=90.0)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="artifact directory")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DatasetError as e:
        print(f"simnet: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except PipelineError as e:
        print(f"simnet: pipeline error: {e}", file=sys.stderr)
        return EXIT_PIPELINE
    except (ValueError, OSError) as e:
        print(f"simnet: error: {e}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
