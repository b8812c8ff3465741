// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "prodsearch/error.hpp"

namespace prodsearch {

/// Product fields in their canonical order. Every document carries all seven
/// slots; a slot may be empty.
enum class Field : std::uint8_t {
    Title = 0,
    Description,
    ProductCategory,
    Metadata,
    Brand,
    Numeric,
    SearchTerms,
};

inline constexpr std::size_t kNumFields = 7;

inline constexpr std::array<Field, kNumFields> kAllFields = {
    Field::Title,   Field::Description, Field::ProductCategory, Field::Metadata,
    Field::Brand,   Field::Numeric,     Field::SearchTerms,
};

constexpr std::size_t field_index(Field f) noexcept { return static_cast<std::size_t>(f); }

/// Serialized name used by the catalog file ("title", "search_terms", ...).
std::string_view field_name(Field f) noexcept;
std::optional<Field> parse_field_name(std::string_view name) noexcept;

struct FieldedDocument {
    std::string doc_id;
    std::array<std::vector<std::string>, kNumFields> fields;

    std::vector<std::string>& instances(Field f) { return fields[field_index(f)]; }
    const std::vector<std::string>& instances(Field f) const { return fields[field_index(f)]; }

    /// Number of fields with at least one non-blank instance.
    std::size_t non_empty_fields() const;
    bool has_field(Field f) const;

    /// Title and Description present and at least two non-empty fields.
    bool is_valid() const;

    bool operator==(const FieldedDocument&) const = default;
};

/// Throws InputError when the Title slot holds more than one instance.
void check_document_shape(const FieldedDocument& doc);

/// Read-only lookup table of documents keyed by doc_id, insertion order kept.
class Catalog {
  public:
    Catalog() = default;

    /// Throws InputError on a duplicate doc_id or a malformed document.
    void add(FieldedDocument doc);

    const FieldedDocument* find(std::string_view doc_id) const;
    /// Throws InputError for unknown ids.
    const FieldedDocument& at(std::string_view doc_id) const;
    bool contains(std::string_view doc_id) const { return find(doc_id) != nullptr; }

    std::size_t size() const noexcept { return m_docs.size(); }
    bool empty() const noexcept { return m_docs.empty(); }
    auto begin() const { return m_docs.begin(); }
    auto end() const { return m_docs.end(); }
    std::vector<FieldedDocument>& documents() { return m_docs; }
    const std::vector<FieldedDocument>& documents() const { return m_docs; }

  private:
    std::vector<FieldedDocument> m_docs;
    std::unordered_map<std::string, std::size_t> m_by_id;
};

/// Reads one JSON object per line:
///   {"doc_id": "...", "fields": {"title": [...], ..., "search_terms": [...]}}
/// Missing field keys are empty. Throws RecordError on malformed lines.
Catalog read_catalog(std::istream& in);
void write_catalog(std::ostream& out, const Catalog& catalog);

// ---------------------------------------------------------------------------
// Labeled data

struct ClickTriple {
    std::string query;
    std::string doc_id;
    std::int64_t clicks = 0;

    bool operator==(const ClickTriple&) const = default;
};

struct ClickCount {
    std::int64_t value = 0;
    bool operator==(const ClickCount&) const = default;
};
struct GradedScore {
    double value = 0.0;
    bool operator==(const GradedScore&) const = default;
};
using RawSignal = std::variant<std::monostate, ClickCount, GradedScore>;

struct LabeledPair {
    std::string query;
    std::string doc_id;
    int label = 0;
    RawSignal raw_signal;

    bool operator==(const LabeledPair&) const = default;
};

struct ClickParseResult {
    std::vector<ClickTriple> triples;
    std::vector<RecordError> errors;
    std::size_t lines = 0;
};

/// Tab-separated `query \t doc_id \t clicks`. Blank lines are skipped.
/// Malformed or negative-click records are reported in `errors` and dropped.
ClickParseResult parse_click_triples(std::istream& in);
/// Single-record form; throws RecordError.
ClickTriple parse_click_line(std::string_view line, std::size_t line_no);

/// 1 iff clicks >= threshold.
int binarize_clicks(std::int64_t clicks, std::int64_t threshold);

/// Rounds half up to {1,2,3}, then compares against `threshold` (2.5).
/// Throws InputError if graded is outside [1, 3].
int binarize_psr(double graded, double threshold = 2.5);
int round_half_up(double x);

/// Query text surviving the length (>= 3 chars) and not-only-numeric rules.
bool query_text_acceptable(std::string_view query);

/// Keeps the pairs of queries that pass query_text_acceptable and have at
/// least one relevant pair. Input order is preserved.
std::vector<LabeledPair> filter_queries(std::span<const LabeledPair> pairs);

std::vector<LabeledPair> label_click_triples(std::span<const ClickTriple> triples,
                                             std::int64_t threshold);

/// Up to top_k unique queries that clicked doc_id (clicks >= 1), ordered by
/// total clicks descending, ties lexicographic.
std::vector<std::string> build_search_terms_field(std::span<const ClickTriple> train_triples,
                                                  std::string_view doc_id,
                                                  std::size_t top_k = 10);

/// All products at once; equivalent to calling build_search_terms_field per doc.
std::unordered_map<std::string, std::vector<std::string>> build_search_terms(
    std::span<const ClickTriple> train_triples, std::size_t top_k = 10);

/// Instances joined by a single space.
std::string assemble_field_text(const FieldedDocument& doc, Field field);
/// Non-empty field texts in canonical field order, space separated.
std::string flatten_document(const FieldedDocument& doc);

// ---------------------------------------------------------------------------
// Splits

struct SplitConfig {
    double validation_fraction = 0.1;
    double test_fraction = 0.1;
    /// Absolute query counts; when set they override the fractions.
    std::optional<std::size_t> validation_queries;
    std::optional<std::size_t> test_queries;
    std::uint64_t seed = 20200725;
};

struct DatasetSplits {
    std::vector<LabeledPair> train;
    std::vector<LabeledPair> validation;
    std::vector<LabeledPair> test;
};

/// Partitions by unique query string; no query lands in two splits.
DatasetSplits split_by_query(std::span<const LabeledPair> pairs, const SplitConfig& cfg);

/// `query \t doc_id \t label \t signal` where signal is `c:<int>`, `g:<real>` or empty.
void write_pairs(std::ostream& out, std::span<const LabeledPair> pairs);
std::vector<LabeledPair> read_pairs(std::istream& in);

/// Pairs grouped per query in first-appearance order.
struct QueryGroup {
    std::string query;
    std::vector<LabeledPair> pairs;
};
std::vector<QueryGroup> group_by_query(std::span<const LabeledPair> pairs);

struct DatasetStats {
    std::size_t entries = 0;
    std::size_t unique_queries = 0;
    std::size_t unique_products = 0;
    double relevant_fraction = 0.0;
    /// Graded pairs whose rounded score is >= 2 over all graded pairs; absent
    /// for clicks.
    std::optional<double> partially_relevant_fraction;
};
DatasetStats compute_stats(std::span<const LabeledPair> pairs);

// ---------------------------------------------------------------------------
// Query classes, consumed from a side file

enum class QueryClass : std::uint8_t {
    BrandCollection = 0,
    ColorFinish,
    Unit,
    Material,
    Model,
    Typo,
    AllOthers,
};
inline constexpr std::size_t kNumQueryClasses = 7;

std::string_view query_class_name(QueryClass c) noexcept;
/// Accepts canonical names ("BrandCollection") and display names ("Brand/Collection").
std::optional<QueryClass> parse_query_class(std::string_view name) noexcept;

/// Query -> classes. Lookups of unlisted queries yield {AllOthers}.
class QueryClassMap {
  public:
    void assign(std::string query, std::vector<QueryClass> classes);
    std::vector<QueryClass> classes_for(std::string_view query) const;
    std::size_t size() const noexcept { return m_map.size(); }

  private:
    std::map<std::string, std::vector<QueryClass>, std::less<>> m_map;
};

/// `query \t Class,Class` lines. Throws RecordError on unknown class names.
QueryClassMap read_query_classes(std::istream& in);

}  // namespace prodsearch
