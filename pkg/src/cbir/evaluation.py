"""Precision@scope evaluation and retrieval-latency benchmarking.

The evaluation protocol treats every database item as a query once.
Precision of one query is the fraction of retrieved items sharing the
query's ground-truth category; the overall figure is the mean over all
queries (so larger categories weigh more), and per-category figures are
means over just that category's queries. The query item itself is retrieved
unless `exclude_self` is set.

Per-query wall time covers query-side feature handling (the PCA projection
when enabled), candidate accumulation, the distance scan and top-k
selection. Store loading and index building are one-time costs and are
excluded. Timing uses a monotonic clock.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .metrics import Metric
from .pca import PcaModel, transform, transform_vector
from .retrieval import (
    RankedResult,
    build_class_routed,
    build_exact,
    query_exact,
    query_routed,
    query_sampled,
)
from .store import EmbeddingStore

MODES = ("exact", "routed", "sampled")


@dataclass(frozen=True)
class EvalConfig:
    """Knobs of one evaluation run; defaults follow the scope-20 L2 protocol."""

    scope: int = 20
    metric: Metric = Metric.L2SQ
    mode: str = "exact"
    use_pca: bool = False
    exclude_self: bool = False
    top_classes: int = 5
    sample_size: int | None = None
    seed: int = 42
    threads: int = 1

    def to_json_obj(self) -> dict:
        return {
            "scope": self.scope,
            "metric": self.metric.value,
            "mode": self.mode,
            "use_pca": self.use_pca,
            "exclude_self": self.exclude_self,
            "top_classes": self.top_classes,
            "sample_size": self.sample_size,
            "seed": self.seed,
            "threads": self.threads,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "EvalConfig":
        return cls(
            scope=obj["scope"],
            metric=Metric.from_string(obj["metric"]),
            mode=obj["mode"],
            use_pca=obj["use_pca"],
            exclude_self=obj["exclude_self"],
            top_classes=obj["top_classes"],
            sample_size=obj["sample_size"],
            seed=obj["seed"],
            threads=obj["threads"],
        )


@dataclass(frozen=True)
class CandidateStats:
    mean: float
    min: int
    max: int


@dataclass(frozen=True)
class LatencyStats:
    mean_ms: float | None
    median_ms: float | None
    p95_ms: float | None
    count: int


@dataclass(frozen=True)
class EvalReport:
    """Full outcome of one evaluation run."""

    config: EvalConfig
    per_query: list[tuple[int, float]]
    per_category: dict[str, float]
    overall: float
    candidate_stats: CandidateStats
    latency_stats: LatencyStats

    def to_json_obj(self, include_latency: bool = True) -> dict:
        lat = self.latency_stats
        if include_latency:
            latency = {"mean": lat.mean_ms, "median": lat.median_ms, "p95": lat.p95_ms}
        else:
            latency = {"mean": None, "median": None, "p95": None}
        return {
            "config": self.config.to_json_obj(),
            "overall": self.overall,
            "per_category": self.per_category,
            "candidate_mean": self.candidate_stats.mean,
            "latency_ms": latency,
            "per_query": [[i, p] for i, p in self.per_query],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "EvalReport":
        per_query = [(int(i), float(p)) for i, p in obj["per_query"]]
        lat = obj["latency_ms"]
        return cls(
            config=EvalConfig.from_json_obj(obj["config"]),
            per_query=per_query,
            per_category={k: float(v) for k, v in obj["per_category"].items()},
            overall=float(obj["overall"]),
            candidate_stats=CandidateStats(mean=float(obj["candidate_mean"]), min=0, max=0),
            latency_stats=LatencyStats(
                mean_ms=lat["mean"], median_ms=lat["median"], p95_ms=lat["p95"],
                count=len(per_query),
            ),
        )


def precision_at_scope(
    retrieved: RankedResult, query_category: str, store: EmbeddingStore
) -> float:
    """Fraction of retrieved items whose category matches the query's."""
    if len(retrieved) == 0:
        raise ValueError("retrieved result is empty")
    labels = store.category_labels()
    ids = retrieved.ids
    if ids.size and (ids.min() < 0 or ids.max() >= labels.shape[0]):
        bad = ids[(ids < 0) | (ids >= labels.shape[0])][0]
        raise KeyError(f"unknown item id {bad}")
    relevant = int(np.count_nonzero(labels[ids] == query_category))
    return relevant / len(retrieved)


class _QueryRunner:
    """Prepared feature bank and indexes; times one query per call."""

    def __init__(self, store: EmbeddingStore, config: EvalConfig, pca: PcaModel | None):
        if store.count == 0:
            raise ValueError("cannot evaluate an empty store")
        if config.scope < 1:
            raise ValueError(f"scope must be >= 1, got {config.scope}")
        if config.mode not in MODES:
            raise ValueError(f"unknown mode {config.mode!r}; expected one of {MODES}")
        if config.use_pca and pca is None:
            raise ValueError("use_pca requires a fitted PcaModel")
        if config.mode == "routed" and store.probabilities is None:
            raise ValueError("routed mode requires a store with probabilities (probs.bin)")
        if config.mode == "sampled":
            if config.sample_size is None:
                raise ValueError("sampled mode requires sample_size")
            if config.sample_size < config.scope:
                raise ValueError(
                    f"sample_size ({config.sample_size}) must be >= scope ({config.scope})"
                )

        self.store = store
        self.config = config
        self.pca = pca if config.use_pca else None
        if self.pca is not None:
            bank = transform(self.pca, store.embeddings)
            space = "pca"
        else:
            bank = store.embeddings
            space = "raw"
        if config.mode == "routed":
            self.routed = build_class_routed(
                store, config.metric, bank, k=config.top_classes, space=space
            )
            self.index = self.routed.base
        else:
            self.routed = None
            self.index = build_exact(store, config.metric, bank, space=space)

    def run(self, item_id: int) -> tuple[float, RankedResult]:
        """Run item `item_id` as the query; returns (elapsed_ms, result)."""
        cfg = self.config
        exclude = item_id if cfg.exclude_self else None
        raw = self.store.embeddings[item_id]
        start = time.perf_counter()
        query = transform_vector(self.pca, raw) if self.pca is not None else raw
        if cfg.mode == "exact":
            result = query_exact(self.index, query, cfg.scope, exclude_id=exclude)
        elif cfg.mode == "routed":
            result = query_routed(
                self.routed, query, self.store.probabilities[item_id], cfg.scope,
                exclude_id=exclude,
            )
        else:
            result = query_sampled(
                self.index, query, cfg.scope, cfg.sample_size,
                seed=cfg.seed + item_id, exclude_id=exclude,
            )
        elapsed_ms = (time.perf_counter() - start) * 1e3
        return elapsed_ms, result


def evaluate(
    store: EmbeddingStore, config: EvalConfig, pca: PcaModel | None = None
) -> EvalReport:
    """Run every database item as a query once and aggregate precision@scope.

    Deterministic given the config (and seed, in sampled mode); latency
    statistics are measurements and naturally vary between runs.
    """
    runner = _QueryRunner(store, config, pca)
    n = store.count
    labels = store.category_labels()

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            outcomes = list(pool.map(runner.run, range(n)))
    else:
        outcomes = [runner.run(i) for i in range(n)]

    times = np.array([t for t, _ in outcomes])
    counts = np.array([r.candidate_count for _, r in outcomes])
    precisions = np.array(
        [precision_at_scope(r, labels[i], store) for i, (_, r) in enumerate(outcomes)]
    )

    per_category: dict[str, float] = {}
    for cat in sorted(set(labels)):
        per_category[cat] = float(precisions[labels == cat].mean())

    return EvalReport(
        config=config,
        per_query=[(i, float(p)) for i, p in enumerate(precisions)],
        per_category=per_category,
        overall=float(precisions.mean()),
        candidate_stats=CandidateStats(
            mean=float(counts.mean()), min=int(counts.min()), max=int(counts.max())
        ),
        latency_stats=_latency_stats(times),
    )


def benchmark_latency(
    store: EmbeddingStore,
    config: EvalConfig,
    repetitions: int,
    pca: PcaModel | None = None,
) -> LatencyStats:
    """Time every database item as a query, `repetitions` times over.

    Queries run sequentially regardless of config.threads to avoid
    contention skew; exactly N x repetitions timings are aggregated.
    """
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    runner = _QueryRunner(store, config, pca)
    times = np.empty(store.count * repetitions)
    pos = 0
    for _ in range(repetitions):
        for i in range(store.count):
            times[pos], _ = runner.run(i)
            pos += 1
    return _latency_stats(times)


def throughput_qps(
    store: EmbeddingStore,
    config: EvalConfig,
    pca: PcaModel | None = None,
) -> float:
    """Wall-clock queries/second with config.threads workers (one pass over N)."""
    runner = _QueryRunner(store, config, pca)
    start = time.perf_counter()
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            list(pool.map(runner.run, range(store.count)))
    else:
        for i in range(store.count):
            runner.run(i)
    return store.count / (time.perf_counter() - start)


def _latency_stats(times_ms: np.ndarray) -> LatencyStats:
    return LatencyStats(
        mean_ms=float(times_ms.mean()),
        median_ms=float(np.median(times_ms)),
        p95_ms=float(np.percentile(times_ms, 95)),
        count=int(times_ms.size),
    )


@dataclass(frozen=True)
class Comparison:
    """Aligned view over several labelled evaluation reports."""

    labels: list[str]
    overall: dict[str, float]
    candidate_mean: dict[str, float]
    latency_mean_ms: dict[str, float | None]
    per_category: dict[str, dict[str, float | None]]
    warnings: list[str]

    def to_json_obj(self) -> dict:
        return {
            "labels": self.labels,
            "overall": self.overall,
            "candidate_mean": self.candidate_mean,
            "latency_mean_ms": self.latency_mean_ms,
            "per_category": self.per_category,
            "warnings": self.warnings,
        }

    def rows(self) -> list[list]:
        """Tabular form: header row, then one row per metric/category."""
        header = ["metric", *self.labels, "warnings"]
        out = [header]
        out.append(["overall_precision", *(self.overall[l] for l in self.labels), ""])
        out.append(["candidate_mean", *(self.candidate_mean[l] for l in self.labels), ""])
        out.append(["latency_mean_ms", *(self.latency_mean_ms[l] for l in self.labels), ""])
        for cat in sorted(self.per_category):
            values = self.per_category[cat]
            missing = [l for l in self.labels if values[l] is None]
            warn = f"missing in: {', '.join(missing)}" if missing else ""
            out.append([f"category:{cat}", *(values[l] for l in self.labels), warn])
        return out

    def to_text(self) -> str:
        rows = [["" if v is None else (f"{v:.6f}" if isinstance(v, float) else str(v)) for v in row]
                for row in self.rows()]
        widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
        return "\n".join(
            "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
            for row in rows
        )

    def to_csv(self) -> str:
        lines = []
        for row in self.rows():
            cells = ["" if v is None else str(v) for v in row]
            lines.append(",".join('"' + c.replace('"', '""') + '"' if ("," in c or '"' in c) else c
                                  for c in cells))
        return "\n".join(lines) + "\n"


def compare_reports(labeled: list[tuple[str, EvalReport]]) -> Comparison:
    """Align two or more labelled reports for side-by-side comparison.

    Categories present in only some reports are kept, with the gaps flagged
    in the warnings column rather than dropped.
    """
    if len(labeled) < 2:
        raise ValueError("compare needs at least 2 reports")
    labels = [label for label, _ in labeled]
    reports = dict(labeled)

    all_categories = sorted({c for _, r in labeled for c in r.per_category})
    per_category: dict[str, dict[str, float | None]] = {}
    warnings: list[str] = []
    for cat in all_categories:
        row: dict[str, float | None] = {}
        for label in labels:
            row[label] = reports[label].per_category.get(cat)
            if row[label] is None:
                warnings.append(f"category {cat!r} missing in report {label!r}")
        per_category[cat] = row

    return Comparison(
        labels=labels,
        overall={l: reports[l].overall for l in labels},
        candidate_mean={l: reports[l].candidate_stats.mean for l in labels},
        latency_mean_ms={l: reports[l].latency_stats.mean_ms for l in labels},
        per_category=per_category,
        warnings=warnings,
    )


def write_report_json(report: EvalReport, path, include_latency: bool = True) -> None:
    """Serialize a report to `path` with stable key order and formatting."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_obj(include_latency=include_latency), fh, indent=2)
        fh.write("\n")
