"""Command-line interface wiring stores, PCA, indexes and evaluation together.

Every subcommand is a thin shim over the library: results are identical to
calling the corresponding functions directly with the same parameters, and
identical argv (plus seeds) produces identical outputs. Wall-clock latency
is a measurement, not a result, so JSON reports carry null latency fields
unless --timing is passed; `bench` always reports measured latency.

Exit codes: 0 success, 1 usage error, 2 data or validation error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .evaluation import (
    EvalConfig,
    EvalReport,
    benchmark_latency,
    compare_reports,
    evaluate,
    throughput_qps,
)
from .metrics import Metric
from .pca import fit_pca, load_pca, save_pca, select_components, transform, transform_vector
from .retrieval import (
    build_class_routed,
    build_exact,
    mean_candidate_size,
    query_exact,
    query_routed,
    query_sampled,
)
from .store import StoreFormatError, StoreValidationError, read_store, write_store
from .synth import SynthSpec, generate


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # raise instead of sys.exit(2) so we can keep usage errors on exit code 1
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cbir", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic store directory")
    p.add_argument("--categories", type=int, default=10)
    p.add_argument("--per-category", type=int, default=200)
    p.add_argument("--dim", type=int, default=1536)
    p.add_argument("--classes", type=int, default=1000)
    p.add_argument("--intra-sigma", type=float, default=1.0)
    p.add_argument("--inter-separation", type=float, default=400.0)
    p.add_argument("--classes-per-category", type=int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True, help="store directory to write")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("validate", help="check a store directory against all invariants")
    p.add_argument("--store", required=True)
    p.add_argument("--json", dest="json_path", default=None)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("pca", help="fit or select principal components")
    pca_sub = p.add_subparsers(dest="pca_command", required=True)

    pf = pca_sub.add_parser("fit", help="fit PCA on a store and write pca.bin")
    pf.add_argument("--store", required=True)
    pf.add_argument("--components", type=int, required=True)
    pf.add_argument("--out", required=True, help="pca.bin path to write")
    pf.add_argument("--json", dest="json_path", default=None)
    pf.set_defaults(func=_cmd_pca_fit)

    ps = pca_sub.add_parser("select", help="pick the component count maximizing precision")
    ps.add_argument("--store", required=True)
    ps.add_argument("--candidates", required=True, help="comma-separated component counts")
    ps.add_argument("--scope", type=int, default=20)
    ps.add_argument("--metric", choices=["l1", "l2sq"], default="l2sq")
    ps.add_argument("--json", dest="json_path", default=None)
    ps.set_defaults(func=_cmd_pca_select)

    p = sub.add_parser("index", help="inspect retrieval indexes")
    index_sub = p.add_subparsers(dest="index_command", required=True)
    pi = index_sub.add_parser("info", help="class-routed index statistics")
    pi.add_argument("--store", required=True)
    pi.add_argument("--top-classes", type=int, default=5)
    pi.add_argument("--json", dest="json_path", default=None)
    pi.set_defaults(func=_cmd_index_info)

    p = sub.add_parser("query", help="retrieve the top-scope items for one query")
    p.add_argument("--store", required=True)
    p.add_argument("--id", type=int, default=None, help="database item id to use as query")
    p.add_argument("--embedding", default=None, help="file of D raw little-endian float32")
    _add_retrieval_flags(p)
    p.add_argument("--json", dest="json_path", default=None)
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("eval", help="precision@scope over every database item as query")
    p.add_argument("--store", required=True)
    _add_retrieval_flags(p)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--timing", action="store_true",
                   help="include measured latency in the JSON report (breaks byte-reproducibility)")
    p.add_argument("--json", dest="json_path", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="retrieval latency over every database item as query")
    p.add_argument("--store", required=True)
    _add_retrieval_flags(p)
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--threads", type=int, default=1,
                   help=">1 also reports parallel throughput separately")
    p.add_argument("--json", dest="json_path", default=None)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("compare", help="align several eval reports side by side")
    p.add_argument("reports", nargs="+", metavar="LABEL=REPORT.json")
    p.add_argument("--json", dest="json_path", default=None)
    p.add_argument("--csv", dest="csv_path", default=None)
    p.set_defaults(func=_cmd_compare)

    return parser


def _add_retrieval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scope", type=int, default=20)
    p.add_argument("--metric", choices=["l1", "l2sq"], default="l2sq")
    p.add_argument("--mode", choices=["exact", "routed", "sampled"], default="exact")
    p.add_argument("--top-classes", type=int, default=5)
    p.add_argument("--sample-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--pca", dest="pca_path", default=None, help="pca.bin from `cbir pca fit`")
    p.add_argument("--exclude-self", action="store_true")


def main(argv=None) -> int:
    return run(sys.argv[1:] if argv is None else list(argv))


def run(argv: list[str]) -> int:
    """Parse and execute one invocation; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        code = args.func(args)
        return 0 if code is None else code
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (StoreFormatError, StoreValidationError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _cmd_synth(args) -> None:
    spec = SynthSpec(
        num_categories=args.categories,
        items_per_category=args.per_category,
        dim=args.dim,
        num_classes=args.classes,
        intra_sigma=args.intra_sigma,
        inter_separation=args.inter_separation,
        classes_per_category=args.classes_per_category,
        seed=args.seed,
    )
    store = generate(spec)
    write_store(store, args.out)
    print(f"wrote store: {store.count} items, dim {store.dim}, "
          f"{spec.num_categories} categories -> {args.out}")


def _cmd_validate(args) -> int:
    try:
        read_store(args.store)
        violations: list[str] = []
    except StoreValidationError as exc:
        violations = exc.violations
    if args.json_path:
        _write_json({"violations": violations}, args.json_path)
    if violations:
        for v in violations:
            print(v, file=sys.stderr)
        return 2
    print("store OK")
    return 0


def _cmd_pca_fit(args) -> None:
    store = read_store(args.store)
    model = fit_pca(store.embeddings, args.components)
    save_pca(model, args.out)
    if args.json_path:
        _write_json(
            {
                "input_dim": model.input_dim,
                "output_dim": model.output_dim,
                "explained_variance": [float(v) for v in model.explained_variance],
            },
            args.json_path,
        )
    print(f"fitted PCA {model.input_dim} -> {model.output_dim}, wrote {args.out}")


def _cmd_pca_select(args) -> None:
    store = read_store(args.store)
    try:
        candidates = [int(tok) for tok in args.candidates.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"--candidates must be comma-separated integers, got {args.candidates!r}")
    best, table = select_components(
        store.embeddings, store, args.scope, Metric.from_string(args.metric), candidates
    )
    if args.json_path:
        _write_json({"selected": best, "table": [[m, p] for m, p in table]}, args.json_path)
    for m, p in table:
        marker = " <- selected" if m == best else ""
        print(f"M={m:5d}  precision={p:.6f}{marker}")


def _cmd_index_info(args) -> None:
    store = read_store(args.store)
    index = build_class_routed(store, Metric.L2SQ, k=args.top_classes)
    sizes = np.array([v.shape[0] for v in index.inverted.values()])
    info = {
        "count": store.count,
        "dim": store.dim,
        "num_classes": store.num_classes,
        "top_classes": args.top_classes,
        "num_inverted_lists": len(index.inverted),
        "inverted_list_size": {
            "min": int(sizes.min()),
            "mean": float(sizes.mean()),
            "max": int(sizes.max()),
        },
        "mean_candidate_size": mean_candidate_size(index),
    }
    if args.json_path:
        _write_json(info, args.json_path)
    for key, value in info.items():
        print(f"{key}: {value}")


def _load_query_vector(args, store):
    if (args.id is None) == (args.embedding is None):
        raise UsageError("query needs exactly one of --id or --embedding")
    if args.id is not None:
        if not 0 <= args.id < store.count:
            raise ValueError(f"unknown item id {args.id} (store has {store.count} items)")
        return store.embeddings[args.id], args.id
    raw = np.fromfile(args.embedding, dtype="<f4")
    if raw.shape[0] != store.dim:
        raise ValueError(
            f"embedding file holds {raw.shape[0]} float32 values, store dim is {store.dim}"
        )
    return raw, None


def _cmd_query(args) -> None:
    store = read_store(args.store)
    metric = Metric.from_string(args.metric)
    raw, query_id = _load_query_vector(args, store)
    exclude = query_id if (args.exclude_self and query_id is not None) else None

    pca = load_pca(args.pca_path) if args.pca_path else None
    bank = transform(pca, store.embeddings) if pca else None
    query = transform_vector(pca, raw) if pca else raw
    space = "pca" if pca else "raw"

    if args.mode == "routed":
        if query_id is None:
            raise ValueError("routed mode needs --id: an external query has no "
                             "class probabilities to route by")
        index = build_class_routed(store, metric, bank, k=args.top_classes, space=space)
        result = query_routed(index, query, store.probabilities[query_id], args.scope,
                              exclude_id=exclude)
    else:
        index = build_exact(store, metric, bank, space=space)
        if args.mode == "sampled":
            if args.sample_size is None:
                raise UsageError("sampled mode requires --sample-size")
            result = query_sampled(index, query, args.scope, args.sample_size, args.seed,
                                   exclude_id=exclude)
        else:
            result = query_exact(index, query, args.scope, exclude_id=exclude)

    obj = {
        "query": {"id": query_id, "embedding": args.embedding},
        "scope": args.scope,
        "metric": args.metric,
        "mode": args.mode,
        "candidate_count": result.candidate_count,
        "results": [[i, d] for i, d in result.entries()],
    }
    if args.json_path:
        _write_json(obj, args.json_path)
    for rank, (item_id, dist) in enumerate(result.entries(), start=1):
        meta = store.meta[item_id]
        print(f"{rank:3d}  id={item_id:6d}  dist={dist:.6f}  {meta.category}  {meta.path}")


def _eval_config(args, use_pca: bool) -> EvalConfig:
    if args.mode == "sampled" and args.sample_size is None:
        raise UsageError("sampled mode requires --sample-size")
    return EvalConfig(
        scope=args.scope,
        metric=Metric.from_string(args.metric),
        mode=args.mode,
        use_pca=use_pca,
        exclude_self=args.exclude_self,
        top_classes=args.top_classes,
        sample_size=args.sample_size,
        seed=args.seed,
        threads=getattr(args, "threads", 1),
    )


def _cmd_eval(args) -> None:
    store = read_store(args.store)
    pca = load_pca(args.pca_path) if args.pca_path else None
    config = _eval_config(args, use_pca=pca is not None)
    report = evaluate(store, config, pca=pca)
    if args.json_path:
        _write_json(report.to_json_obj(include_latency=args.timing), args.json_path)
    _print_report(report, timing=args.timing)


def _cmd_bench(args) -> None:
    store = read_store(args.store)
    pca = load_pca(args.pca_path) if args.pca_path else None
    config = _eval_config(args, use_pca=pca is not None)
    stats = benchmark_latency(store, config, args.repetitions, pca=pca)
    obj = {
        "config": config.to_json_obj(),
        "repetitions": args.repetitions,
        "count": stats.count,
        "latency_ms": {"mean": stats.mean_ms, "median": stats.median_ms, "p95": stats.p95_ms},
    }
    if args.threads > 1:
        obj["throughput_qps"] = throughput_qps(store, config, pca=pca)
    if args.json_path:
        _write_json(obj, args.json_path)
    print(f"{stats.count} timed queries: mean {stats.mean_ms:.3f} ms, "
          f"median {stats.median_ms:.3f} ms, p95 {stats.p95_ms:.3f} ms")
    if args.threads > 1:
        print(f"throughput with {args.threads} threads: {obj['throughput_qps']:.1f} queries/s")


def _cmd_compare(args) -> None:
    labeled: list[tuple[str, EvalReport]] = []
    for token in args.reports:
        label, sep, path = token.partition("=")
        if not sep or not label or not path:
            raise UsageError(f"expected LABEL=REPORT.json, got {token!r}")
        with open(path, encoding="utf-8") as fh:
            labeled.append((label, EvalReport.from_json_obj(json.load(fh))))
    comparison = compare_reports(labeled)
    if args.json_path:
        _write_json(comparison.to_json_obj(), args.json_path)
    if args.csv_path:
        with open(args.csv_path, "w", encoding="utf-8") as fh:
            fh.write(comparison.to_csv())
    print(comparison.to_text())


def _print_report(report: EvalReport, timing: bool) -> None:
    print(f"overall precision @ scope {report.config.scope}: {report.overall:.6f}")
    for cat, p in report.per_category.items():
        print(f"  {cat}: {p:.6f}")
    cs = report.candidate_stats
    print(f"candidates scanned per query: mean {cs.mean:.1f} (min {cs.min}, max {cs.max})")
    # measurement, not a result: keep stdout identical across identical argv
    ls = report.latency_stats
    note = "" if timing else "  (not included in JSON; pass --timing)"
    print(f"latency: mean {ls.mean_ms:.3f} ms, median {ls.median_ms:.3f} ms, "
          f"p95 {ls.p95_ms:.3f} ms{note}", file=sys.stderr)


def _write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


if __name__ == "__main__":
    sys.exit(main())
