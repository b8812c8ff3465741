// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "prodsearch/model.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "prodsearch/error.hpp"

namespace prodsearch {

std::string_view variant_name(Variant v) noexcept { return v == Variant::Fielded ? "fielded" : "flat"; }

Variant parse_variant(std::string_view name)
{
    if (name == "fielded") {
        return Variant::Fielded;
    }
    if (name == "flat") {
        return Variant::Flat;
    }
    throw InputError("unknown model variant '" + std::string(name) + "' (expected fielded or flat)");
}

std::size_t ModelConfig::feature_length() const
{
    const auto rows = document_rows();
    return rows * encoder.d_model * 2 + rows * encoder.query_len;
}

void ModelConfig::validate() const
{
    encoder.validate();
    if (head_hidden == 0) {
        throw InputError("head_hidden must be >= 1");
    }
    if (!(head_dropout >= 0.0 && head_dropout < 1.0)) {
        throw InputError("head dropout must lie in [0, 1)");
    }
}

namespace {

template <typename T>
HeadLayout add_head_parameters(ParameterSet<T>& params, const ModelConfig& cfg)
{
    HeadLayout h;
    const auto f = static_cast<Eigen::Index>(cfg.feature_length());
    const auto hidden = static_cast<Eigen::Index>(cfg.head_hidden);
    h.w_hidden = params.add("head.w_hidden", f, hidden);
    h.b_hidden = params.add("head.b_hidden", 1, hidden, true);
    h.w_out = params.add("head.w_out", hidden, 1);
    h.b_out = params.add("head.b_out", 1, 1, true);
    return h;
}

template <typename T>
void xavier(Matrix<T>& m, Rng& rng)
{
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = static_cast<T>((2.0 * rng.uniform() - 1.0) * limit);
    }
}

std::unordered_set<std::string> token_set(const std::string& text)
{
    auto toks = tokenize(text);
    return {toks.begin(), toks.end()};
}

}  // namespace

template <typename T>
Model<T>::Model(const ModelConfig& cfg) : m_cfg(cfg)
{
    m_cfg.validate();
    m_encoder = add_encoder_parameters(m_params, m_cfg.encoder);
    m_head = add_head_parameters(m_params, m_cfg);
}

template <typename T>
Model<T> Model<T>::create(const ModelConfig& cfg, std::uint64_t seed)
{
    Model m(cfg);
    Rng rng(seed);
    init_encoder_parameters(m.m_params, m.m_encoder, m.m_cfg.encoder, rng);
    xavier(m.m_params[m.m_head.w_hidden].value, rng);
    xavier(m.m_params[m.m_head.w_out].value, rng);
    return m;
}

template <typename T>
Model<T> Model<T>::from_parameters(const ModelConfig& cfg, ParameterSet<T> params)
{
    Model m(cfg);
    if (params.size() != m.m_params.size()) {
        throw InputError("parameter count " + std::to_string(params.size()) + " does not match the configuration (" +
                         std::to_string(m.m_params.size()) + ")");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& want = m.m_params[i];
        const auto& got = params[i];
        if (want.name != got.name || want.value.rows() != got.value.rows() || want.value.cols() != got.value.cols()) {
            throw InputError("parameter " + std::to_string(i) + " is " + got.name + " " +
                             std::to_string(got.value.rows()) + "x" + std::to_string(got.value.cols()) +
                             ", expected " + want.name + " " + std::to_string(want.value.rows()) + "x" +
                             std::to_string(want.value.cols()));
        }
    }
    m.m_params = std::move(params);
    return m;
}

// ---------------------------------------------------------------------------

MatchMatrix build_match_matrix(std::span<const std::string> query_tokens, const FieldedDocument& doc,
                               std::size_t query_len)
{
    MatchMatrix m{kNumFields, query_len, std::vector<std::uint8_t>(kNumFields * query_len, 0)};
    const auto n = std::min(query_tokens.size(), query_len);
    for (auto f : kAllFields) {
        auto tokens = token_set(assemble_field_text(doc, f));
        for (std::size_t j = 0; j < n; ++j) {
            if (tokens.contains(query_tokens[j])) {
                m.cells[field_index(f) * query_len + j] = 1;
            }
        }
    }
    return m;
}

MatchMatrix build_flat_match_row(std::span<const std::string> query_tokens, const FieldedDocument& doc,
                                 std::size_t query_len)
{
    MatchMatrix m{1, query_len, std::vector<std::uint8_t>(query_len, 0)};
    auto tokens = token_set(flatten_document(doc));
    const auto n = std::min(query_tokens.size(), query_len);
    for (std::size_t j = 0; j < n; ++j) {
        m.cells[j] = tokens.contains(query_tokens[j]) ? 1 : 0;
    }
    return m;
}

template <typename T>
Matrix<T> broadcast_query(const QueryVector<T>& q, std::size_t n)
{
    return q.values.replicate(static_cast<Eigen::Index>(n), 1);
}

template <typename T>
std::vector<T> smm_features(const QueryVector<T>& q, const Matrix<T>& doc_rows, const MatchMatrix& match)
{
    if (q.values.rows() != 1 || q.values.cols() != doc_rows.cols()) {
        throw InputError("query vector width does not match the document matrix");
    }
    if (static_cast<Eigen::Index>(match.rows) != doc_rows.rows() || match.cells.size() != match.rows * match.cols) {
        throw InputError("match matrix rows do not match the document matrix");
    }
    Matrix<T> qb = broadcast_query(q, static_cast<std::size_t>(doc_rows.rows()));
    Matrix<T> diff = (qb - doc_rows).cwiseAbs();
    Matrix<T> prod = qb.cwiseProduct(doc_rows);
    std::vector<T> out;
    out.reserve(static_cast<std::size_t>(diff.size() + prod.size()) + match.cells.size());
    out.insert(out.end(), diff.data(), diff.data() + diff.size());
    out.insert(out.end(), prod.data(), prod.data() + prod.size());
    for (auto c : match.cells) {
        out.push_back(static_cast<T>(c));
    }
    return out;
}

PreparedPair prepare_pair(std::string_view query, const FieldedDocument& doc, const Vocab& vocab,
                          const ModelConfig& cfg, int label)
{
    auto qtok = tokenize(query);
    if (qtok.empty()) {
        throw InputError("query '" + std::string(query) + "' has no tokens");
    }
    if (!doc.is_valid()) {
        throw InputError("document " + doc.doc_id + " is not valid (needs title and description)");
    }
    PreparedPair p;
    p.label = static_cast<float>(label);
    p.query = encode_ids(qtok, vocab, cfg.encoder.query_len);
    if (cfg.variant == Variant::Fielded) {
        for (auto f : kAllFields) {
            auto toks = tokenize(assemble_field_text(doc, f));
            p.document.push_back(toks.empty() ? TokenSeq{} : encode_ids(toks, vocab, cfg.encoder.field_len));
        }
        p.match = build_match_matrix(qtok, doc, cfg.encoder.query_len);
    } else {
        auto toks = tokenize(flatten_document(doc));
        p.document.push_back(toks.empty() ? TokenSeq{} : encode_ids(toks, vocab, cfg.encoder.flat_len));
        p.match = build_flat_match_row(qtok, doc, cfg.encoder.query_len);
    }
    return p;
}

namespace {

template <typename T>
Var head_on_tape(Tape<T>& t, const Model<T>& model, Var features, Mode mode, Rng* rng)
{
    const auto& h = model.head_layout();
    auto hidden = t.relu(t.add_row(t.matmul(features, t.param(h.w_hidden)), t.param(h.b_hidden)));
    if (mode == Mode::Train) {
        if (rng == nullptr) {
            throw StateError("training-mode head needs a random stream");
        }
        hidden = t.dropout(hidden, static_cast<T>(model.config().head_dropout), *rng);
    }
    auto logit = t.add_row(t.matmul(hidden, t.param(h.w_out)), t.param(h.b_out));
    return t.sigmoid(logit);
}

template <typename T>
Matrix<T> match_as_matrix(const MatchMatrix& m)
{
    Matrix<T> out(static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
    for (std::size_t i = 0; i < m.cells.size(); ++i) {
        out.data()[i] = static_cast<T>(m.cells[i]);
    }
    return out;
}

template <typename T>
Var features_on_tape(Tape<T>& t, Var q, Var doc_rows, const MatchMatrix& match, const FeatureMask& mask)
{
    const auto rows = t.value(doc_rows).rows();
    auto qb = t.broadcast_rows(q, rows);
    auto diff = t.abs(t.sub(qb, doc_rows));
    auto prod = t.hadamard(qb, doc_rows);
    auto m = t.constant(match_as_matrix<T>(match));
    const auto& shape = t.value(diff);
    if (!mask.abs_diff) {
        diff = t.constant(Matrix<T>::Zero(shape.rows(), shape.cols()));
    }
    if (!mask.product) {
        prod = t.constant(Matrix<T>::Zero(shape.rows(), shape.cols()));
    }
    if (!mask.match) {
        m = t.constant(Matrix<T>::Zero(static_cast<Eigen::Index>(match.rows), static_cast<Eigen::Index>(match.cols)));
    }
    std::array<Var, 3> parts{diff, prod, m};
    return t.concat_flat(parts);
}

}  // namespace

template <typename T>
Var forward_pair(Tape<T>& tape, const Model<T>& model, const PreparedPair& pair, Mode mode, Rng* rng,
                 const FeatureMask& features)
{
    const auto& cfg = model.config();
    if (pair.document.size() != cfg.document_rows()) {
        throw InputError("prepared pair does not match the model variant");
    }
    EncoderPass<T> pass{tape, cfg.encoder, model.encoder_layout(), mode, rng};
    auto q = encode_sequence(pass, pair.query);
    std::vector<Var> rows;
    rows.reserve(pair.document.size());
    for (const auto& seq : pair.document) {
        if (seq.size() == 0) {
            rows.push_back(tape.constant(Matrix<T>::Zero(1, static_cast<Eigen::Index>(cfg.encoder.d_model))));
        } else {
            rows.push_back(encode_sequence(pass, seq));
        }
    }
    auto doc_rows = rows.size() == 1 ? rows.front() : tape.stack_rows(rows);
    auto feats = features_on_tape(tape, q, doc_rows, pair.match, features);
    return head_on_tape(tape, model, feats, mode, rng);
}

template <typename T>
QueryVector<T> encode_query(std::string_view query, const Vocab& vocab, const Model<T>& model)
{
    auto toks = tokenize(query);
    if (toks.empty()) {
        throw InputError("query '" + std::string(query) + "' has no tokens");
    }
    const auto& cfg = model.config().encoder;
    Tape<T> tape(model.params(), nullptr);
    EncoderPass<T> pass{tape, cfg, model.encoder_layout(), Mode::Eval, nullptr};
    auto v = encode_sequence(pass, encode_ids(toks, vocab, cfg.query_len));
    return {tape.value(v)};
}

template <typename T>
FieldMatrix<T> encode_document_fields(const FieldedDocument& doc, const Vocab& vocab, const Model<T>& model)
{
    const auto& cfg = model.config().encoder;
    FieldMatrix<T> out;
    out.rows = Matrix<T>::Zero(static_cast<Eigen::Index>(kNumFields), static_cast<Eigen::Index>(cfg.d_model));
    for (auto f : kAllFields) {
        auto toks = tokenize(assemble_field_text(doc, f));
        if (toks.empty()) {
            continue;
        }
        Tape<T> tape(model.params(), nullptr);
        EncoderPass<T> pass{tape, cfg, model.encoder_layout(), Mode::Eval, nullptr};
        auto v = encode_sequence(pass, encode_ids(toks, vocab, cfg.field_len));
        out.rows.row(static_cast<Eigen::Index>(field_index(f))) = tape.value(v).row(0);
        out.present[field_index(f)] = true;
    }
    return out;
}

template <typename T>
QueryVector<T> encode_document_flat(const FieldedDocument& doc, const Vocab& vocab, const Model<T>& model)
{
    const auto& cfg = model.config().encoder;
    auto toks = tokenize(flatten_document(doc));
    if (toks.empty()) {
        return {Matrix<T>::Zero(1, static_cast<Eigen::Index>(cfg.d_model))};
    }
    Tape<T> tape(model.params(), nullptr);
    EncoderPass<T> pass{tape, cfg, model.encoder_layout(), Mode::Eval, nullptr};
    auto v = encode_sequence(pass, encode_ids(toks, vocab, cfg.flat_len));
    return {tape.value(v)};
}

template <typename T>
T head_forward(std::span<const T> features, const Model<T>& model, Mode mode, Rng* rng)
{
    if (features.size() != model.config().feature_length()) {
        throw InputError("feature length " + std::to_string(features.size()) + " does not match the head input " +
                         std::to_string(model.config().feature_length()));
    }
    Tape<T> tape(model.params(), nullptr);
    Matrix<T> x(1, static_cast<Eigen::Index>(features.size()));
    std::copy(features.begin(), features.end(), x.data());
    auto out = head_on_tape(tape, model, tape.constant(std::move(x)), mode, rng);
    return tape.value(out)(0, 0);
}

template <typename T>
T score_pair(std::string_view query, const FieldedDocument& doc, const Vocab& vocab, const Model<T>& model,
             const FeatureMask& features)
{
    auto prepared = prepare_pair(query, doc, vocab, model.config());
    Tape<T> tape(model.params(), nullptr);
    auto out = forward_pair(tape, model, prepared, Mode::Eval, nullptr, features);
    return tape.value(out)(0, 0);
}

template <typename T>
T score(std::string_view query, const FieldedDocument& doc, const Vocab& vocab, const Model<T>& model,
        const FeatureMask& features)
{
    if (model.config().variant != Variant::Fielded) {
        throw InputError("score expects a fielded model");
    }
    return score_pair(query, doc, vocab, model, features);
}

template <typename T>
T score_flat(std::string_view query, const FieldedDocument& doc, const Vocab& vocab, const Model<T>& model,
             const FeatureMask& features)
{
    if (model.config().variant != Variant::Flat) {
        throw InputError("score_flat expects a flat model");
    }
    return score_pair(query, doc, vocab, model, features);
}

// ---------------------------------------------------------------------------

template <typename T>
CachedScorer<T>::CachedScorer(const Model<T>& model, const Vocab& vocab, const Catalog& catalog)
    : m_model(model), m_vocab(vocab), m_catalog(catalog)
{}

template <typename T>
const Matrix<T>& CachedScorer<T>::query_vector(const std::string& query)
{
    auto it = m_queries.find(query);
    if (it == m_queries.end()) {
        it = m_queries.emplace(query, encode_query(query, m_vocab, m_model).values).first;
        m_query_tokens.emplace(query, tokenize(query));
    }
    return it->second;
}

template <typename T>
const Matrix<T>& CachedScorer<T>::document_rows(const std::string& doc_id)
{
    auto it = m_docs.find(doc_id);
    if (it == m_docs.end()) {
        const auto& doc = m_catalog.at(doc_id);
        if (!doc.is_valid()) {
            throw InputError("document " + doc_id + " is not valid (needs title and description)");
        }
        Matrix<T> rows = m_model.config().variant == Variant::Fielded
                             ? encode_document_fields(doc, m_vocab, m_model).rows
                             : encode_document_flat(doc, m_vocab, m_model).values;
        it = m_docs.emplace(doc_id, std::move(rows)).first;
    }
    return it->second;
}

template <typename T>
T CachedScorer<T>::operator()(const std::string& query, const std::string& doc_id)
{
    const auto& q = query_vector(query);
    const auto& rows = document_rows(doc_id);
    const auto& doc = m_catalog.at(doc_id);
    const auto& qtok = m_query_tokens.at(query);
    const auto qlen = m_model.config().encoder.query_len;
    auto match = m_model.config().variant == Variant::Fielded ? build_match_matrix(qtok, doc, qlen)
                                                              : build_flat_match_row(qtok, doc, qlen);
    Tape<T> tape(m_model.params(), nullptr);
    auto feats = features_on_tape(tape, tape.constant(q), tape.constant(rows), match, FeatureMask{});
    return tape.value(head_on_tape(tape, m_model, feats, Mode::Eval, nullptr))(0, 0);
}

#define PRODSEARCH_INSTANTIATE(T)                                                                                \
    template Matrix<T> broadcast_query<T>(const QueryVector<T>&, std::size_t);                                   \
    template std::vector<T> smm_features<T>(const QueryVector<T>&, const Matrix<T>&, const MatchMatrix&);        \
    template QueryVector<T> encode_query<T>(std::string_view, const Vocab&, const Model<T>&);                    \
    template FieldMatrix<T> encode_document_fields<T>(const FieldedDocument&, const Vocab&, const Model<T>&);    \
    template QueryVector<T> encode_document_flat<T>(const FieldedDocument&, const Vocab&, const Model<T>&);      \
    template T head_forward<T>(std::span<const T>, const Model<T>&, Mode, Rng*);                                 \
    template T score<T>(std::string_view, const FieldedDocument&, const Vocab&, const Model<T>&,                 \
                        const FeatureMask&);                                                                     \
    template T score_flat<T>(std::string_view, const FieldedDocument&, const Vocab&, const Model<T>&,            \
                             const FeatureMask&);                                                                \
    template T score_pair<T>(std::string_view, const FieldedDocument&, const Vocab&, const Model<T>&,            \
                             const FeatureMask&);                                                                \
    template Var forward_pair<T>(Tape<T>&, const Model<T>&, const PreparedPair&, Mode, Rng*, const FeatureMask&); \
    template class Model<T>;                                                                                     \
    template class CachedScorer<T>;

PRODSEARCH_INSTANTIATE(float)
PRODSEARCH_INSTANTIATE(double)

#undef PRODSEARCH_INSTANTIATE

}  // namespace prodsearch
