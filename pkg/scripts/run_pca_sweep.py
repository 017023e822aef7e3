#!/usr/bin/env python3
"""Sweep PCA component counts and report precision at each.

Reproduces the component-selection protocol: fit PCA per candidate M,
project the database, evaluate precision@scope with every item as query,
and pick the M with the best precision (ties to the smaller M). Also
benchmarks mean query latency with and without the winning projection.

Usage:
    python scripts/run_pca_sweep.py --store DIR --candidates 25,50,100,200
    python scripts/run_pca_sweep.py   # synthetic store, small sweep
"""

import argparse
import json
import sys

from cbir import (
    EvalConfig,
    Metric,
    SynthSpec,
    benchmark_latency,
    fit_pca,
    generate,
    read_store,
    select_components,
)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--store", default=None, help="store directory; synthetic if omitted")
    parser.add_argument("--candidates", default="10,25,50,100",
                        help="comma-separated component counts")
    parser.add_argument("--scope", type=int, default=20)
    parser.add_argument("--metric", choices=["l1", "l2sq"], default="l2sq")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--json", dest="json_path", default=None)
    args = parser.parse_args()

    if args.store:
        store = read_store(args.store)
    else:
        store = generate(SynthSpec(num_categories=10, items_per_category=100,
                                   dim=512, num_classes=100, seed=args.seed))
        print("using a synthetic 10x100 store (dim 512)", file=sys.stderr)

    metric = Metric.from_string(args.metric)
    candidates = [int(tok) for tok in args.candidates.split(",") if tok.strip()]
    max_m = min(store.count, store.dim)
    candidates = [m for m in candidates if 1 <= m <= max_m]
    if not candidates:
        sys.exit(f"no usable candidates <= {max_m}")

    baseline = benchmark_latency(store, EvalConfig(scope=args.scope, metric=metric),
                                 repetitions=1)
    best, table = select_components(store.embeddings, store, args.scope, metric, candidates)

    print(f"{'M':>6}  {'precision':>10}")
    for m, precision in table:
        marker = "  <- selected" if m == best else ""
        print(f"{m:6d}  {precision:10.6f}{marker}")

    model = fit_pca(store.embeddings, best)
    reduced = benchmark_latency(store, EvalConfig(scope=args.scope, metric=metric,
                                                  use_pca=True),
                                repetitions=1, pca=model)
    print(f"\nmean query latency: {baseline.mean_ms:.3f} ms at dim {store.dim}, "
          f"{reduced.mean_ms:.3f} ms at dim {best}")

    if args.json_path:
        payload = {
            "selected": best,
            "table": [[m, p] for m, p in table],
            "latency_ms": {"full_dim": baseline.mean_ms, "reduced": reduced.mean_ms},
        }
        with open(args.json_path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")


if __name__ == "__main__":
    main()
