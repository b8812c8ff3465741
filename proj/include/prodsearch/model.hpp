// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Siamese relevance model: a shared encoder turns the query into one vector
// and each product field into one row of a field matrix; the structured
// matching features [|q - D|; q o D; M] feed a two-layer head with a sigmoid
// output.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prodsearch/autograd.hpp"
#include "prodsearch/catalog.hpp"
#include "prodsearch/encoder.hpp"
#include "prodsearch/text.hpp"

namespace prodsearch {

/// Fielded: one encoding per field. Flat: the whole document as one text.
enum class Variant : std::uint8_t { Fielded = 0, Flat = 1 };

std::string_view variant_name(Variant v) noexcept;
/// Throws InputError for names other than "fielded" / "flat".
Variant parse_variant(std::string_view name);

struct ModelConfig {
    EncoderConfig encoder;
    std::size_t head_hidden = 256;
    double head_dropout = 0.5;
    Variant variant = Variant::Fielded;

    /// Rows of the document matrix: 7 when fielded, 1 when flat.
    std::size_t document_rows() const { return variant == Variant::Fielded ? kNumFields : 1; }
    /// rows * d + rows * d + rows * query_len.
    std::size_t feature_length() const;
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

struct HeadLayout {
    std::size_t w_hidden = 0;
    std::size_t b_hidden = 0;
    std::size_t w_out = 0;
    std::size_t b_out = 0;
};

template <typename T>
class Model {
  public:
    /// Randomly initialized model; identical seeds give identical weights.
    static Model create(const ModelConfig& cfg, std::uint64_t seed);
    /// Wraps existing parameters, checking their names and shapes.
    static Model from_parameters(const ModelConfig& cfg, ParameterSet<T> params);

    const ModelConfig& config() const noexcept { return m_cfg; }
    const EncoderLayout& encoder_layout() const noexcept { return m_encoder; }
    const HeadLayout& head_layout() const noexcept { return m_head; }
    ParameterSet<T>& params() noexcept { return m_params; }
    const ParameterSet<T>& params() const noexcept { return m_params; }

    template <typename U>
    Model<U> cast() const
    {
        return Model<U>::from_parameters(m_cfg, m_params.template cast<U>());
    }

  private:
    Model(const ModelConfig& cfg);

    ModelConfig m_cfg;
    ParameterSet<T> m_params;
    EncoderLayout m_encoder;
    HeadLayout m_head;
};

// ---------------------------------------------------------------------------
// Plain value types

/// Pooled query encoding, 1 x d_model.
template <typename T>
struct QueryVector {
    Matrix<T> values;
};

/// One pooled row per field in canonical order; absent fields are zero rows.
template <typename T>
struct FieldMatrix {
    Matrix<T> rows;
    std::array<bool, kNumFields> present{};
};

/// rows x query_len binary lexical match indicators. rows is 7 for the
/// fielded model (one per field) or 1 for the flat model.
struct MatchMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> cells;

    std::uint8_t at(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }
    bool operator==(const MatchMatrix&) const = default;
};

/// Which segments of the matching features are kept; dropped segments are
/// replaced with zeros of the same length.
struct FeatureMask {
    bool abs_diff = true;
    bool product = true;
    bool match = true;
};

/// M[i][j] = 1 iff query token j (j < query_len) occurs among field i's
/// tokens. Tokens come from `tokenize`, compared by exact string equality.
MatchMatrix build_match_matrix(std::span<const std::string> query_tokens, const FieldedDocument& doc,
                               std::size_t query_len);
/// Single-row variant over the flattened document.
MatchMatrix build_flat_match_row(std::span<const std::string> query_tokens, const FieldedDocument& doc,
                                 std::size_t query_len);

/// The query row replicated n times.
template <typename T>
Matrix<T> broadcast_query(const QueryVector<T>& q, std::size_t n = kNumFields);

/// [|Q - D| ; Q o D ; M], each block flattened row-major. Throws InputError
/// on mismatched dimensions.
template <typename T>
std::vector<T> smm_features(const QueryVector<T>& q, const Matrix<T>& doc_rows, const MatchMatrix& match);

template <typename T>
QueryVector<T> encode_query(std::string_view query, const Vocab& vocab, const Model<T>& model);
template <typename T>
FieldMatrix<T> encode_document_fields(const FieldedDocument& doc, const Vocab& vocab, const Model<T>& model);
/// Zero vector when the flattened document has no token.
template <typename T>
QueryVector<T> encode_document_flat(const FieldedDocument& doc, const Vocab& vocab, const Model<T>& model);

/// sigmoid(W2 dropout(relu(W1 x + b1)) + b2). `rng` is required in Train mode.
template <typename T>
T head_forward(std::span<const T> features, const Model<T>& model, Mode mode = Mode::Eval, Rng* rng = nullptr);

/// Fielded relevance probability. Throws InputError on an invalid document,
/// an empty query, or a flat model.
template <typename T>
T score(std::string_view query, const FieldedDocument& doc, const Vocab& vocab, const Model<T>& model,
        const FeatureMask& features = {});
/// Flat-document relevance probability (ablation baseline).
template <typename T>
T score_flat(std::string_view query, const FieldedDocument& doc, const Vocab& vocab, const Model<T>& model,
             const FeatureMask& features = {});
/// Dispatches on the model variant.
template <typename T>
T score_pair(std::string_view query, const FieldedDocument& doc, const Vocab& vocab, const Model<T>& model,
             const FeatureMask& features = {});

// ---------------------------------------------------------------------------
// Tape-level forward pass shared by training and scoring

/// Tokenized inputs of one (query, document) pair, built once and reused
/// across epochs.
struct PreparedPair {
    TokenSeq query;
    /// 7 field sequences (fielded) or 1 flattened sequence (flat). Empty
    /// sequences mark absent fields.
    std::vector<TokenSeq> document;
    MatchMatrix match;
    float label = 0.0F;
};

/// Throws InputError when the query has no token or the document is invalid.
PreparedPair prepare_pair(std::string_view query, const FieldedDocument& doc, const Vocab& vocab,
                          const ModelConfig& cfg, int label = 0);

/// Builds the relevance probability (1 x 1) on the tape.
template <typename T>
Var forward_pair(Tape<T>& tape, const Model<T>& model, const PreparedPair& pair, Mode mode, Rng* rng,
                 const FeatureMask& features = {});

/// Scores many pairs, encoding each distinct query and document once.
template <typename T>
class CachedScorer {
  public:
    CachedScorer(const Model<T>& model, const Vocab& vocab, const Catalog& catalog);

    T operator()(const std::string& query, const std::string& doc_id);

  private:
    const Matrix<T>& query_vector(const std::string& query);
    const Matrix<T>& document_rows(const std::string& doc_id);

    const Model<T>& m_model;
    const Vocab& m_vocab;
    const Catalog& m_catalog;
    std::map<std::string, Matrix<T>> m_queries;
    std::map<std::string, Matrix<T>> m_docs;
    std::map<std::string, std::vector<std::string>> m_query_tokens;
};

extern template class Model<float>;
extern template class Model<double>;
extern template class CachedScorer<float>;
extern template class CachedScorer<double>;

}  // namespace prodsearch
