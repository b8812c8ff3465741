// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#include <map>

#include "prodsearch/lexindex.hpp"
#include "prodsearch/text.hpp"

namespace prodsearch {
namespace {

constexpr std::array<double, 4> kK1Grid = {0.9, 1.2, 1.5, 2.0};
constexpr std::array<double, 3> kBGrid = {0.3, 0.5, 0.75};
constexpr std::array<double, 5> kWeightGrid = {0.0, 0.5, 1.0, 2.0, 4.0};

}  // namespace

TuningResult tune_lexical(const FieldedIndex& index, std::span<const QueryGroup> validation, LexicalScorer scorer,
                          std::size_t weight_passes)
{
    std::map<std::string, std::vector<std::string>> terms;
    for (const auto& g : validation) {
        terms.emplace(g.query, analyze_lexical(g.query));
    }

    TuningResult best;
    best.ndcg5 = -1.0;
    auto consider = [&](const Bm25Params& p) {
        ++best.evaluations;
        auto run = evaluate_run(
            [&](const std::string& q, const std::string& d) {
                const auto& t = terms.at(q);
                return scorer == LexicalScorer::Bm25 ? bm25_score(index, t, d, p) : bm25f_score(index, t, d, p);
            },
            validation, {5});
        double v = run.mean.ndcg.empty() ? 0.0 : run.mean.ndcg[0];
        // Strict improvement keeps the earliest grid point on ties.
        if (v > best.ndcg5) {
            best.ndcg5 = v;
            best.params = p;
        }
    };

    for (double k1 : kK1Grid) {
        for (double b : kBGrid) {
            Bm25Params p;
            p.k1 = k1;
            p.b = b;
            p.field_b.fill(b);
            consider(p);
        }
    }
    if (scorer == LexicalScorer::Bm25F) {
        for (std::size_t pass = 0; pass < weight_passes; ++pass) {
            for (std::size_t f = 0; f < kNumFields; ++f) {
                const auto base = best.params;
                for (double w : kWeightGrid) {
                    auto p = base;
                    p.field_weight[f] = w;
                    bool any = false;
                    for (double x : p.field_weight) {
                        any = any || x > 0.0;
                    }
                    if (any && p != base) {
                        consider(p);
                    }
                }
            }
        }
    }
    return best;
}

}  // namespace prodsearch
