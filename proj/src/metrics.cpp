// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <set>

#include "prodsearch/error.hpp"
#include "prodsearch/eval.hpp"

namespace prodsearch {

double ndcg_at_k(std::span<const int> ranked_labels, std::size_t k)
{
    if (k < 1) {
        throw InputError("NDCG cutoff must be >= 1");
    }
    const auto depth = std::min(k, ranked_labels.size());
    double dcg = 0.0;
    for (std::size_t i = 0; i < depth; ++i) {
        if (ranked_labels[i] > 0) {
            dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
        }
    }
    auto relevant = static_cast<std::size_t>(
        std::count_if(ranked_labels.begin(), ranked_labels.end(), [](int l) { return l > 0; }));
    double ideal = 0.0;
    for (std::size_t i = 0; i < std::min(depth, relevant); ++i) {
        ideal += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
    return ideal > 0.0 ? dcg / ideal : 0.0;
}

double average_precision(std::span<const int> ranked_labels)
{
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < ranked_labels.size(); ++i) {
        if (ranked_labels[i] > 0) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

double reciprocal_rank(std::span<const int> ranked_labels)
{
    for (std::size_t i = 0; i < ranked_labels.size(); ++i) {
        if (ranked_labels[i] > 0) {
            return 1.0 / static_cast<double>(i + 1);
        }
    }
    return 0.0;
}

RankedList rank_candidates(std::string query, std::vector<ScoredCandidate> candidates)
{
    std::sort(candidates.begin(), candidates.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.doc_id < b.doc_id;
    });
    RankedList out;
    out.query = std::move(query);
    for (auto& c : candidates) {
        out.doc_ids.push_back(std::move(c.doc_id));
        out.labels.push_back(c.label);
    }
    return out;
}

MetricsSummary summarize(std::span<const QueryMetrics> rows, std::size_t cutoffs)
{
    MetricsSummary s;
    s.queries = rows.size();
    s.ndcg.assign(cutoffs, 0.0);
    if (rows.empty()) {
        return s;
    }
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < cutoffs; ++i) {
            s.ndcg[i] += r.ndcg[i];
        }
        s.map += r.ap;
        s.mrr += r.rr;
    }
    const auto n = static_cast<double>(rows.size());
    for (auto& v : s.ndcg) {
        v /= n;
    }
    s.map /= n;
    s.mrr /= n;
    return s;
}

double MetricsReport::ndcg(std::size_t k) const
{
    for (std::size_t i = 0; i < cutoffs.size(); ++i) {
        if (cutoffs[i] == k) {
            return mean.ndcg[i];
        }
    }
    throw InputError("report has no NDCG@" + std::to_string(k));
}

std::vector<std::string> MetricsReport::metric_names() const
{
    std::vector<std::string> names;
    for (auto k : cutoffs) {
        names.push_back("ndcg@" + std::to_string(k));
    }
    names.emplace_back("map");
    names.emplace_back("mrr");
    return names;
}

std::vector<double> MetricsReport::values(const std::string& metric) const
{
    std::vector<double> out;
    out.reserve(per_query.size());
    if (metric == "map" || metric == "mrr") {
        for (const auto& q : per_query) {
            out.push_back(metric == "map" ? q.ap : q.rr);
        }
        return out;
    }
    for (std::size_t i = 0; i < cutoffs.size(); ++i) {
        if (metric == "ndcg@" + std::to_string(cutoffs[i])) {
            for (const auto& q : per_query) {
                out.push_back(q.ndcg[i]);
            }
            return out;
        }
    }
    throw InputError("unknown metric '" + metric + "'");
}

MetricsReport evaluate_run(const PairScorer& scorer, std::span<const QueryGroup> groups,
                           std::vector<std::size_t> cutoffs)
{
    MetricsReport report;
    report.cutoffs = std::move(cutoffs);
    for (const auto& g : groups) {
        if (g.pairs.size() < 2) {
            report.warnings.push_back("query '" + g.query + "' has fewer than two candidates; skipped");
            continue;
        }
        std::vector<ScoredCandidate> cands;
        cands.reserve(g.pairs.size());
        for (const auto& p : g.pairs) {
            cands.push_back({p.doc_id, p.label, scorer(g.query, p.doc_id)});
        }
        auto ranked = rank_candidates(g.query, std::move(cands));
        QueryMetrics m;
        m.query = g.query;
        for (auto k : report.cutoffs) {
            m.ndcg.push_back(ndcg_at_k(ranked.labels, k));
        }
        m.ap = average_precision(ranked.labels);
        m.rr = reciprocal_rank(ranked.labels);
        report.per_query.push_back(std::move(m));
    }
    report.mean = summarize(report.per_query, report.cutoffs.size());
    return report;
}

std::vector<ClassRow> class_breakdown(const MetricsReport& report, const QueryClassMap& classes,
                                      std::vector<std::string>* warnings)
{
    std::vector<std::vector<QueryMetrics>> buckets(kNumQueryClasses);
    for (const auto& q : report.per_query) {
        for (auto c : classes.classes_for(q.query)) {
            buckets[static_cast<std::size_t>(c)].push_back(q);
        }
    }
    std::vector<ClassRow> rows;
    for (std::size_t i = 0; i < kNumQueryClasses; ++i) {
        auto c = static_cast<QueryClass>(i);
        if (buckets[i].empty()) {
            if (warnings != nullptr) {
                warnings->push_back("class " + std::string(query_class_name(c)) + " has no evaluated query");
            }
            continue;
        }
        rows.push_back({c, summarize(buckets[i], report.cutoffs.size())});
    }
    return rows;
}

AblationResult run_ablation(MetricsReport fielded, MetricsReport flat, std::string dataset)
{
    if (fielded.per_query.size() != flat.per_query.size() || fielded.cutoffs != flat.cutoffs) {
        throw InputError("ablation reports cover different query sets");
    }
    for (std::size_t i = 0; i < fielded.per_query.size(); ++i) {
        if (fielded.per_query[i].query != flat.per_query[i].query) {
            throw InputError("ablation reports cover different query sets");
        }
    }
    AblationResult r;
    r.dataset = std::move(dataset);
    r.metrics = fielded.metric_names();
    for (const auto& m : r.metrics) {
        auto a = fielded.values(m);
        auto b = flat.values(m);
        r.tests.push_back(a.size() >= 2 ? paired_ttest(a, b) : TTestResult{});
    }
    r.fielded = std::move(fielded);
    r.flat = std::move(flat);
    return r;
}

}  // namespace prodsearch
