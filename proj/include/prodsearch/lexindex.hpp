// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "prodsearch/catalog.hpp"
#include "prodsearch/eval.hpp"

namespace prodsearch {

struct Posting {
    std::uint32_t doc = 0;  // internal document number, ascending doc_id order
    std::uint32_t tf = 0;

    bool operator==(const Posting&) const = default;
};

/// Per-field inverted index over stemmed, stopword-filtered tokens.
class FieldedIndex {
  public:
    /// Throws InputError for an empty catalog.
    static FieldedIndex build(const Catalog& catalog);

    std::size_t num_docs() const noexcept { return m_doc_ids.size(); }
    std::size_t num_terms() const noexcept { return m_terms.size(); }
    std::optional<std::uint32_t> doc_number(std::string_view doc_id) const;
    const std::string& doc_id(std::uint32_t doc) const { return m_doc_ids[doc]; }
    std::optional<std::uint32_t> term_id(std::string_view term) const;
    const std::string& term(std::uint32_t id) const { return m_terms[id]; }

    /// Postings of a term in one field, sorted by document number. Empty for
    /// unknown terms.
    std::span<const Posting> postings(Field field, std::string_view term) const;
    std::span<const Posting> postings(Field field, std::uint32_t term_id) const;
    /// Documents containing the term in any field.
    std::uint32_t df(std::string_view term) const;
    std::uint32_t df(std::uint32_t term_id) const { return m_df[term_id]; }
    std::uint32_t tf(Field field, std::uint32_t term_id, std::uint32_t doc) const;

    std::uint32_t field_length(Field field, std::uint32_t doc) const { return m_lengths[field_index(field)][doc]; }
    double avg_field_length(Field field) const { return m_avg_lengths[field_index(field)]; }
    std::uint32_t doc_length(std::uint32_t doc) const;
    double avg_doc_length() const noexcept { return m_avg_doc_length; }

    /// Little-endian binary format with magic "PSIDX001" and a version word.
    void save(std::ostream& out) const;
    static FieldedIndex load(std::istream& in);
    /// `field \t term \t df \t doc_id:tf ...` per non-empty posting list.
    void dump_postings(std::ostream& out, std::optional<std::string> term = std::nullopt,
                       std::optional<Field> field = std::nullopt) const;

    bool operator==(const FieldedIndex&) const = default;

  private:
    void finalize();

    std::vector<std::string> m_doc_ids;
    std::vector<std::string> m_terms;
    std::unordered_map<std::string, std::uint32_t> m_term_ids;
    std::unordered_map<std::string, std::uint32_t> m_doc_numbers;
    // [field][term] -> postings
    std::array<std::vector<std::vector<Posting>>, kNumFields> m_postings;
    std::array<std::vector<std::uint32_t>, kNumFields> m_lengths;
    std::array<double, kNumFields> m_avg_lengths{};
    std::vector<std::uint32_t> m_df;
    double m_avg_doc_length = 0.0;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
    /// BM25F only.
    std::array<double, kNumFields> field_weight{1, 1, 1, 1, 1, 1, 1};
    std::array<double, kNumFields> field_b{0.75, 0.75, 0.75, 0.75, 0.75, 0.75, 0.75};

    /// Throws InputError unless k1 > 0, b values lie in [0, 1], weights are
    /// non-negative and at least one is positive.
    void validate() const;

    /// Flat `key = value` text: k1, b, w.<field>, b.<field>.
    void save(std::ostream& out) const;
    static Bm25Params load(std::istream& in);

    bool operator==(const Bm25Params&) const = default;
};

enum class LexicalScorer { Bm25, Bm25F };
/// Throws InputError for names other than "bm25" / "bm25f".
LexicalScorer parse_lexical_scorer(std::string_view name);

/// ln((N - df + 0.5) / (df + 0.5) + 1)
double bm25_idf(std::size_t num_docs, std::size_t df);

/// Whole-document BM25 with fields merged into one bag. `query_terms` are
/// lexical-path terms (see analyze_lexical); duplicates count once.
/// Throws InputError for unknown doc ids.
double bm25_score(const FieldedIndex& index, std::span<const std::string> query_terms, std::string_view doc_id,
                  const Bm25Params& params);

/// BM25F: per-field weighted, length-normalized pseudo-frequency saturated
/// once per term with the (k1 + 1) factor and document-level IDF.
double bm25f_score(const FieldedIndex& index, std::span<const std::string> query_terms, std::string_view doc_id,
                   const Bm25Params& params);

struct RankedDoc {
    std::string doc_id;
    double score = 0.0;
};

/// Candidates by descending score, ties by ascending doc_id.
std::vector<RankedDoc> rank_lexical(const FieldedIndex& index, std::string_view query,
                                    std::span<const std::string> candidates, const Bm25Params& params,
                                    LexicalScorer scorer);

/// Validation tuning. BM25 searches the full k1 x b grid. BM25F searches
/// k1 x b (shared by all fields) and then runs coordinate passes over each
/// field weight in {0, 0.5, 1, 2, 4}. Objective: mean NDCG@5.
struct TuningResult {
    Bm25Params params;
    double ndcg5 = 0.0;
    std::size_t evaluations = 0;
};
TuningResult tune_lexical(const FieldedIndex& index, std::span<const QueryGroup> validation, LexicalScorer scorer,
                          std::size_t weight_passes = 2);

}  // namespace prodsearch
