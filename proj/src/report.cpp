// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "prodsearch/eval.hpp"

namespace prodsearch {
namespace {

std::string fixed(double v, int digits)
{
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

std::vector<double> summary_values(const MetricsSummary& s)
{
    std::vector<double> v = s.ndcg;
    v.push_back(s.map);
    v.push_back(s.mrr);
    return v;
}

std::vector<std::string> display_names(const MetricsReport& report)
{
    std::vector<std::string> names;
    for (auto k : report.cutoffs) {
        names.push_back("NDCG@" + std::to_string(k));
    }
    names.emplace_back("MAP");
    names.emplace_back("MRR");
    return names;
}

std::string class_display(QueryClass c)
{
    switch (c) {
    case QueryClass::BrandCollection: return "Brand/Collection";
    case QueryClass::ColorFinish: return "Color/Finish";
    case QueryClass::AllOthers: return "All others";
    default: return std::string(query_class_name(c));
    }
}

std::string pad(const std::string& s, std::size_t width)
{
    return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

}  // namespace

void write_report_tsv(std::ostream& out, const MetricsReport& report)
{
    out << "query";
    for (const auto& m : report.metric_names()) {
        out << '\t' << m;
    }
    out << '\n';
    for (const auto& q : report.per_query) {
        out << q.query;
        for (auto v : q.ndcg) {
            out << '\t' << fixed(v, 6);
        }
        out << '\t' << fixed(q.ap, 6) << '\t' << fixed(q.rr, 6) << '\n';
    }
    out << "MEAN";
    for (auto v : summary_values(report.mean)) {
        out << '\t' << fixed(v, 6);
    }
    out << '\n';
}

void write_report_jsonl(std::ostream& out, const MetricsReport& report)
{
    auto names = report.metric_names();
    for (const auto& q : report.per_query) {
        nlohmann::ordered_json j;
        j["query"] = q.query;
        for (std::size_t i = 0; i < q.ndcg.size(); ++i) {
            j[names[i]] = q.ndcg[i];
        }
        j["map"] = q.ap;
        j["mrr"] = q.rr;
        out << j.dump() << '\n';
    }
    nlohmann::ordered_json s;
    s["query"] = nullptr;
    s["queries"] = report.mean.queries;
    for (std::size_t i = 0; i < report.mean.ndcg.size(); ++i) {
        s[names[i]] = report.mean.ndcg[i];
    }
    s["map"] = report.mean.map;
    s["mrr"] = report.mean.mrr;
    out << s.dump() << '\n';
}

void write_class_table(std::ostream& out, std::span<const ClassRow> rows, const MetricsReport& report)
{
    out << "class\tqueries";
    for (const auto& m : report.metric_names()) {
        out << '\t' << m;
    }
    out << '\n';
    for (const auto& r : rows) {
        out << query_class_name(r.query_class) << '\t' << r.summary.queries;
        for (auto v : summary_values(r.summary)) {
            out << '\t' << fixed(v, 6);
        }
        out << '\n';
    }
}

void write_class_comparison(std::ostream& out, std::span<const ClassRow> baseline, std::span<const ClassRow> ours,
                            const MetricsReport& report, const std::string& baseline_name,
                            const std::string& ours_name)
{
    auto names = display_names(report);
    out << pad("Query labels", 18);
    for (const auto& n : names) {
        out << pad(n + " " + baseline_name, 14) << pad(n + " " + ours_name, 14);
    }
    out << '\n';
    for (const auto& b : baseline) {
        const ClassRow* match = nullptr;
        for (const auto& o : ours) {
            if (o.query_class == b.query_class) {
                match = &o;
            }
        }
        if (match == nullptr) {
            continue;
        }
        out << pad(class_display(b.query_class), 18);
        auto bv = summary_values(b.summary);
        auto ov = summary_values(match->summary);
        for (std::size_t i = 0; i < bv.size(); ++i) {
            out << pad(fixed(bv[i], 3), 14) << pad(fixed(ov[i], 3), 14);
        }
        out << '\n';
    }
}

void write_ablation_table(std::ostream& out, std::span<const AblationResult> results, double alpha)
{
    if (results.empty()) {
        return;
    }
    auto names = display_names(results.front().fielded);
    out << pad("Models", 10) << pad("Test", 10);
    for (const auto& n : names) {
        out << pad(n, 10);
    }
    out << '\n';
    for (const auto& r : results) {
        auto flat = summary_values(r.flat.mean);
        auto fielded = summary_values(r.fielded.mean);
        out << pad("Flat", 10) << pad(r.dataset, 10);
        for (auto v : flat) {
            out << pad(fixed(v, 3), 10);
        }
        out << '\n' << pad("Fielded", 10) << pad(r.dataset, 10);
        for (std::size_t i = 0; i < fielded.size(); ++i) {
            const auto& t = r.tests[i];
            bool significant = t.mean_difference > 0.0 && t.p < alpha;
            out << pad(fixed(fielded[i], 3) + (significant ? "*" : ""), 10);
        }
        out << '\n';
    }
}

void write_ablation_tsv(std::ostream& out, std::span<const AblationResult> results)
{
    out << "dataset\tmetric\tflat\tfielded\tmean_diff\tt\tp\tdf\tdegenerate\n";
    for (const auto& r : results) {
        auto flat = summary_values(r.flat.mean);
        auto fielded = summary_values(r.fielded.mean);
        for (std::size_t i = 0; i < r.metrics.size(); ++i) {
            const auto& t = r.tests[i];
            out << r.dataset << '\t' << r.metrics[i] << '\t' << fixed(flat[i], 6) << '\t' << fixed(fielded[i], 6)
                << '\t' << fixed(t.mean_difference, 6) << '\t' << fixed(t.t, 6) << '\t' << fixed(t.p, 6) << '\t'
                << t.df << '\t' << (t.degenerate ? 1 : 0) << '\n';
        }
    }
}

}  // namespace prodsearch
