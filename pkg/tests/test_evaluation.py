import json

import numpy as np
import pytest

from cbir import (
    EvalConfig,
    EvalReport,
    Metric,
    RankedResult,
    SynthSpec,
    benchmark_latency,
    build_exact,
    compare_reports,
    evaluate,
    fit_pca,
    generate,
    precision_at_scope,
    query_exact,
)
from cbir.evaluation import write_report_json

from conftest import make_store


def ranked(ids):
    ids = np.asarray(ids, np.int64)
    return RankedResult(ids=ids, distances=np.zeros(len(ids)), candidate_count=len(ids))


def two_category_store(n_query_cat=30, n_other=30):
    emb = np.zeros((n_query_cat + n_other, 2), np.float32)
    cats = ["q"] * n_query_cat + ["other"] * n_other
    return make_store(emb, cats)


# --- precision_at_scope ---------------------------------------------------


def test_precision_13_of_20():
    store = two_category_store()
    retrieved = ranked(list(range(13)) + list(range(30, 37)))  # 13 of 20 relevant
    assert precision_at_scope(retrieved, "q", store) == 13 / 20 == 0.65


def test_precision_all_relevant():
    store = two_category_store()
    assert precision_at_scope(ranked(range(20)), "q", store) == 1.0


def test_precision_none_relevant():
    store = two_category_store()
    assert precision_at_scope(ranked(range(30, 50)), "q", store) == 0.0


def test_precision_rejects_empty_result():
    with pytest.raises(ValueError, match="empty"):
        precision_at_scope(ranked([]), "q", two_category_store())


def test_precision_rejects_unknown_id():
    with pytest.raises(KeyError, match="unknown item id"):
        precision_at_scope(ranked([0, 999]), "q", two_category_store())


# --- evaluate -------------------------------------------------------------


def test_single_category_store_scores_one():
    rng = np.random.default_rng(0)
    store = make_store(rng.standard_normal((30, 5)), ["only"] * 30)
    report = evaluate(store, EvalConfig(scope=10))
    assert report.overall == 1.0
    assert report.per_category == {"only": 1.0}


def test_planted_clusters_score_one(clustered_store):
    report = evaluate(clustered_store, EvalConfig(scope=20))
    assert report.overall == 1.0
    assert all(v == 1.0 for v in report.per_category.values())
    assert report.candidate_stats.mean == clustered_store.count


def test_overall_is_mean_of_per_query(clustered_store):
    report = evaluate(clustered_store, EvalConfig(scope=7, metric=Metric.L1))
    values = [p for _, p in report.per_query]
    assert report.overall == pytest.approx(np.mean(values), abs=1e-9)
    assert len(values) == clustered_store.count
    assert all(0.0 <= p <= 1.0 for p in values)


def test_per_category_means(clustered_store):
    report = evaluate(clustered_store, EvalConfig(scope=30))  # > cluster size: mixing
    labels = clustered_store.category_labels()
    for cat, reported in report.per_category.items():
        mask = labels == cat
        expected = np.mean([p for (i, p) in report.per_query if mask[i]])
        assert reported == pytest.approx(expected, abs=1e-12)


def test_self_counts_when_not_excluded():
    rng = np.random.default_rng(1)
    # every category unique: only the self-hit can be relevant
    store = make_store(rng.standard_normal((12, 4)), [f"c{i}" for i in range(12)])
    report = evaluate(store, EvalConfig(scope=4))
    assert all(p >= 1 / 4 for _, p in report.per_query)


def test_exclude_self_drops_query_item():
    rng = np.random.default_rng(2)
    store = make_store(rng.standard_normal((12, 4)), [f"c{i}" for i in range(12)])
    report = evaluate(store, EvalConfig(scope=4, exclude_self=True))
    assert all(p == 0.0 for _, p in report.per_query)
    assert report.candidate_stats.max == 11


def test_routed_mode_matches_manual_queries(clustered_store):
    from cbir import build_class_routed, query_routed

    config = EvalConfig(scope=10, mode="routed", top_classes=5)
    report = evaluate(clustered_store, config)
    index = build_class_routed(clustered_store, Metric.L2SQ, k=5)
    labels = clustered_store.category_labels()
    for i in (0, 17, 63, 99):
        manual = query_routed(
            index, clustered_store.embeddings[i], clustered_store.probabilities[i], 10
        )
        assert report.per_query[i][1] == precision_at_scope(manual, labels[i], clustered_store)
    assert report.candidate_stats.max <= clustered_store.count


def test_routed_candidates_below_exact(clustered_store):
    exact = evaluate(clustered_store, EvalConfig(scope=10))
    routed = evaluate(clustered_store, EvalConfig(scope=10, mode="routed"))
    assert routed.candidate_stats.mean < exact.candidate_stats.mean
    assert abs(routed.overall - exact.overall) <= 0.02


def test_sampled_mode_deterministic(clustered_store):
    config = EvalConfig(scope=5, mode="sampled", sample_size=40, seed=7)
    a = evaluate(clustered_store, config)
    b = evaluate(clustered_store, config)
    assert a.per_query == b.per_query
    assert a.candidate_stats == b.candidate_stats


def test_sampled_mode_requires_sample_size(clustered_store):
    with pytest.raises(ValueError, match="sample_size"):
        evaluate(clustered_store, EvalConfig(mode="sampled"))
    with pytest.raises(ValueError, match="sample_size"):
        evaluate(clustered_store, EvalConfig(mode="sampled", sample_size=3, scope=20))


def test_routed_mode_requires_probs():
    store = make_store(np.ones((3, 2), np.float32), list("abc"))
    with pytest.raises(ValueError, match="probs.bin"):
        evaluate(store, EvalConfig(mode="routed", scope=1))


def test_unknown_mode_rejected(clustered_store):
    with pytest.raises(ValueError, match="unknown mode"):
        evaluate(clustered_store, EvalConfig(mode="fuzzy"))


def test_empty_store_rejected():
    store = make_store(np.zeros((0, 3), np.float32), [])
    with pytest.raises(ValueError, match="empty"):
        evaluate(store, EvalConfig())


def test_use_pca_requires_model(clustered_store):
    with pytest.raises(ValueError, match="PcaModel"):
        evaluate(clustered_store, EvalConfig(use_pca=True))


def test_pca_full_rank_preserves_precision(clustered_store):
    store = clustered_store
    model = fit_pca(store.embeddings, min(store.count, store.dim))
    config = EvalConfig(scope=10, use_pca=True)
    with_pca = evaluate(store, config, pca=model)
    without = evaluate(store, EvalConfig(scope=10))
    assert with_pca.overall == pytest.approx(without.overall, abs=1e-6)


def test_threaded_evaluate_matches_sequential(clustered_store):
    seq = evaluate(clustered_store, EvalConfig(scope=8))
    par = evaluate(clustered_store, EvalConfig(scope=8, threads=4))
    assert seq.per_query == par.per_query
    assert seq.overall == par.overall


def test_routed_with_pca_features(clustered_store):
    # routing on probabilities, distances in the reduced space
    store = clustered_store
    model = fit_pca(store.embeddings, 8)
    config = EvalConfig(scope=10, mode="routed", use_pca=True)
    report = evaluate(store, config, pca=model)
    assert report.candidate_stats.mean == 25.0  # planted category unions
    assert report.overall == 1.0


# --- benchmark_latency ----------------------------------------------------


def test_benchmark_counts_queries(clustered_store):
    stats = benchmark_latency(clustered_store, EvalConfig(scope=5), repetitions=2)
    assert stats.count == 2 * clustered_store.count
    assert stats.mean_ms > 0
    assert stats.p95_ms >= stats.median_ms >= 0


def test_benchmark_rejects_zero_repetitions(clustered_store):
    with pytest.raises(ValueError, match="repetitions"):
        benchmark_latency(clustered_store, EvalConfig(), repetitions=0)


def test_pca_scan_is_faster_than_raw():
    # 500x512 bank vs its 16-dim projection: the reduced scan wins clearly
    spec = SynthSpec(num_categories=4, items_per_category=125, dim=512,
                     num_classes=20, intra_sigma=1.0, inter_separation=250.0,
                     classes_per_category=5, seed=21)
    store = generate(spec)
    model = fit_pca(store.embeddings, 16)
    raw = benchmark_latency(store, EvalConfig(scope=20), repetitions=1)
    reduced = benchmark_latency(
        store, EvalConfig(scope=20, use_pca=True), repetitions=1, pca=model
    )
    assert reduced.mean_ms < raw.mean_ms


# --- reports and comparison -----------------------------------------------


def test_report_json_schema(clustered_store, tmp_path):
    report = evaluate(clustered_store, EvalConfig(scope=5))
    path = tmp_path / "report.json"
    write_report_json(report, path)
    obj = json.loads(path.read_text())
    assert set(obj) == {"config", "overall", "per_category", "candidate_mean",
                        "latency_ms", "per_query"}
    assert set(obj["latency_ms"]) == {"mean", "median", "p95"}
    assert obj["per_query"] == [[i, p] for i, p in report.per_query]
    assert obj["config"]["metric"] == "l2sq"

    write_report_json(report, path, include_latency=False)
    obj = json.loads(path.read_text())
    assert obj["latency_ms"] == {"mean": None, "median": None, "p95": None}


def test_report_json_roundtrip(clustered_store):
    report = evaluate(clustered_store, EvalConfig(scope=5, mode="routed", seed=3))
    back = EvalReport.from_json_obj(report.to_json_obj())
    assert back.config == report.config
    assert back.per_query == report.per_query
    assert back.per_category == report.per_category
    assert back.overall == report.overall
    assert back.candidate_stats.mean == report.candidate_stats.mean


def test_compare_identical_reports(clustered_store):
    report = evaluate(clustered_store, EvalConfig(scope=5))
    comparison = compare_reports([("a", report), ("b", report)])
    assert comparison.overall["a"] == comparison.overall["b"]
    assert comparison.candidate_mean["a"] == comparison.candidate_mean["b"]
    for row in comparison.per_category.values():
        assert row["a"] == row["b"]
    assert comparison.warnings == []


def test_compare_exact_vs_routed(clustered_store):
    exact = evaluate(clustered_store, EvalConfig(scope=10))
    routed = evaluate(clustered_store, EvalConfig(scope=10, mode="routed"))
    comparison = compare_reports([("exact", exact), ("routed", routed)])
    assert comparison.candidate_mean["routed"] < comparison.candidate_mean["exact"]
    assert abs(comparison.overall["routed"] - comparison.overall["exact"]) <= 0.02
    text = comparison.to_text()
    assert "overall_precision" in text and "exact" in text


def test_compare_flags_category_mismatch():
    store_a = make_store(np.zeros((4, 2), np.float32), ["x"] * 4)
    store_b = make_store(np.zeros((4, 2), np.float32), ["y"] * 4)
    rep_a = evaluate(store_a, EvalConfig(scope=2))
    rep_b = evaluate(store_b, EvalConfig(scope=2))
    comparison = compare_reports([("a", rep_a), ("b", rep_b)])
    assert any("missing in report 'b'" in w for w in comparison.warnings)
    assert any("missing in report 'a'" in w for w in comparison.warnings)
    assert comparison.per_category["x"]["b"] is None
    csv_text = comparison.to_csv()
    assert "category:x" in csv_text


def test_compare_needs_two_reports(clustered_store):
    report = evaluate(clustered_store, EvalConfig(scope=2))
    with pytest.raises(ValueError, match="at least 2"):
        compare_reports([("only", report)])


def test_scope_beyond_cluster_size_drops_precision(clustered_store):
    # scope 40 over clusters of 25: at most 25 of 40 can be relevant
    report = evaluate(clustered_store, EvalConfig(scope=40))
    assert report.overall == pytest.approx(25 / 40, abs=1e-9)
