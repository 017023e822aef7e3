#!/usr/bin/env python3
"""Exact vs class-routed retrieval on a synthetic clustered database.

Generates a store with concentrated class probabilities, evaluates both
retrieval modes over every item as query, and reports precision, candidate
counts and mean latency side by side. Defaults reproduce the desk-scale
speedup experiment (10,000 items, 1536-dim features, 10 categories).

Usage:
    python scripts/run_speedup_benchmark.py --items-per-category 1000
    python scripts/run_speedup_benchmark.py --store DIR   # reuse an existing store
"""

import argparse
import json
import sys

from cbir import (
    EvalConfig,
    Metric,
    SynthSpec,
    compare_reports,
    evaluate,
    generate,
    read_store,
)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--store", default=None, help="evaluate an existing store directory")
    parser.add_argument("--categories", type=int, default=10)
    parser.add_argument("--items-per-category", type=int, default=1000)
    parser.add_argument("--dim", type=int, default=1536)
    parser.add_argument("--classes", type=int, default=1000)
    parser.add_argument("--scope", type=int, default=20)
    parser.add_argument("--metric", choices=["l1", "l2sq"], default="l2sq")
    parser.add_argument("--top-classes", type=int, default=5)
    parser.add_argument("--seed", type=int, default=97)
    parser.add_argument("--json", dest="json_path", default=None)
    args = parser.parse_args()

    if args.store:
        store = read_store(args.store)
    else:
        spec = SynthSpec(
            num_categories=args.categories,
            items_per_category=args.items_per_category,
            dim=args.dim,
            num_classes=args.classes,
            seed=args.seed,
        )
        print(f"generating {spec.num_categories * spec.items_per_category} items "
              f"({spec.num_categories} categories, dim {spec.dim})...", file=sys.stderr)
        store = generate(spec)

    metric = Metric.from_string(args.metric)
    print("running exact evaluation...", file=sys.stderr)
    exact = evaluate(store, EvalConfig(scope=args.scope, metric=metric, mode="exact"))
    print("running routed evaluation...", file=sys.stderr)
    routed = evaluate(store, EvalConfig(scope=args.scope, metric=metric, mode="routed",
                                        top_classes=args.top_classes))

    comparison = compare_reports([("exact", exact), ("routed", routed)])
    print(comparison.to_text())
    speedup = exact.latency_stats.mean_ms / routed.latency_stats.mean_ms
    fraction = routed.candidate_stats.mean / store.count
    print(f"\nrouted scans {routed.candidate_stats.mean:.0f}/{store.count} items "
          f"({100 * fraction:.1f}%), {speedup:.2f}x faster per query, "
          f"precision {exact.overall:.4f} -> {routed.overall:.4f}")

    if args.json_path:
        payload = {
            "comparison": comparison.to_json_obj(),
            "speedup": speedup,
            "candidate_fraction": fraction,
        }
        with open(args.json_path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")


if __name__ == "__main__":
    main()
