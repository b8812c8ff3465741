// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prodsearch/catalog.hpp"

namespace prodsearch {

// ---------------------------------------------------------------------------
// Per-list metrics over binary relevance labels in ranked order

/// Binary-gain NDCG at cutoff k (k >= 1); 0 when no label is relevant.
double ndcg_at_k(std::span<const int> ranked_labels, std::size_t k);
/// Mean of precision at each relevant rank; 0 when nothing is relevant.
double average_precision(std::span<const int> ranked_labels);
/// 1 / rank of the first relevant item over the full list; 0 when none.
double reciprocal_rank(std::span<const int> ranked_labels);

struct ScoredCandidate {
    std::string doc_id;
    int label = 0;
    double score = 0.0;
};

struct RankedList {
    std::string query;
    std::vector<std::string> doc_ids;
    std::vector<int> labels;
};

/// Descending score, ties by ascending doc_id.
RankedList rank_candidates(std::string query, std::vector<ScoredCandidate> candidates);

// ---------------------------------------------------------------------------
// Reports

struct QueryMetrics {
    std::string query;
    /// Aligned with MetricsReport::cutoffs.
    std::vector<double> ndcg;
    double ap = 0.0;
    double rr = 0.0;
};

struct MetricsSummary {
    std::size_t queries = 0;
    std::vector<double> ndcg;
    double map = 0.0;
    double mrr = 0.0;
};

struct MetricsReport {
    std::vector<std::size_t> cutoffs = {1, 5};
    std::vector<QueryMetrics> per_query;
    MetricsSummary mean;
    std::vector<std::string> warnings;

    /// Mean NDCG at one of the report's cutoffs; throws InputError otherwise.
    double ndcg(std::size_t k) const;
    /// Per-query values of a named metric: "ndcg@K", "map" or "mrr".
    std::vector<double> values(const std::string& metric) const;
    /// Metric names in display order: ndcg@k..., map, mrr.
    std::vector<std::string> metric_names() const;
};

MetricsSummary summarize(std::span<const QueryMetrics> rows, std::size_t cutoffs);

using PairScorer = std::function<double(const std::string& query, const std::string& doc_id)>;

/// Ranks each query's candidates by `scorer` and macro-averages the metrics.
/// Queries with fewer than two candidates are skipped with a warning.
MetricsReport evaluate_run(const PairScorer& scorer, std::span<const QueryGroup> groups,
                           std::vector<std::size_t> cutoffs = {1, 5});

struct ClassRow {
    QueryClass query_class = QueryClass::AllOthers;
    MetricsSummary summary;
};

/// One row per class that has at least one evaluated query, in enum order.
/// Multi-class queries count toward each of their classes. Empty classes
/// are reported in `warnings`.
std::vector<ClassRow> class_breakdown(const MetricsReport& report, const QueryClassMap& classes,
                                      std::vector<std::string>* warnings = nullptr);

// ---------------------------------------------------------------------------
// Significance

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    std::size_t df = 0;
    double mean_difference = 0.0;
    /// Differences have zero variance but nonzero mean: t is infinite, p = 0.
    bool degenerate = false;
};

/// Paired two-tailed Student's t-test on a - b. Throws InputError unless
/// both have the same length >= 2.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

/// Regularized incomplete beta I_x(a, b) via Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);
/// P(|T| >= |t|) for Student's t with df degrees of freedom.
double student_t_two_tailed(double t, double df);

// ---------------------------------------------------------------------------
// Ablation

struct AblationResult {
    std::string dataset;
    MetricsReport fielded;
    MetricsReport flat;
    /// One per metric in MetricsReport::metric_names order.
    std::vector<std::string> metrics;
    std::vector<TTestResult> tests;
};

/// Compares two reports over the same queries. Throws InputError when the
/// evaluated query lists differ.
AblationResult run_ablation(MetricsReport fielded, MetricsReport flat, std::string dataset = "test");

// ---------------------------------------------------------------------------
// Output

/// `query \t ndcg@1 \t ... \t map \t mrr` rows followed by a `MEAN` row.
void write_report_tsv(std::ostream& out, const MetricsReport& report);
/// One JSON object per query, then a summary object with "query": null.
void write_report_jsonl(std::ostream& out, const MetricsReport& report);
/// Per-class rows: `class \t queries \t ndcg@1 ... map \t mrr`.
void write_class_table(std::ostream& out, std::span<const ClassRow> rows, const MetricsReport& report);
/// Two reports side by side per query class, like an error-analysis table.
void write_class_comparison(std::ostream& out, std::span<const ClassRow> baseline, std::span<const ClassRow> ours,
                            const MetricsReport& report, const std::string& baseline_name,
                            const std::string& ours_name);
/// Model rows by metric columns with '*' marking p < alpha improvements.
void write_ablation_table(std::ostream& out, std::span<const AblationResult> results, double alpha = 0.05);
void write_ablation_tsv(std::ostream& out, std::span<const AblationResult> results);

}  // namespace prodsearch
