// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "prodsearch/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prodsearch/error.hpp"

namespace prodsearch {

void EncoderConfig::validate() const
{
    if (d_model == 0 || n_layers == 0 || n_heads == 0 || d_ff == 0 || query_len == 0 || field_len == 0 || flat_len == 0 ||
        vocab_size < 2) {
        throw InputError("encoder dimensions must be >= 1 and vocab must hold PAD and UNK");
    }
    if (d_model % n_heads != 0) {
        throw InputError("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                         std::to_string(n_heads));
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw InputError("encoder dropout must lie in [0, 1)");
    }
}

std::size_t EncoderConfig::max_positions() const { return std::max({query_len, field_len, flat_len}); }

template <typename T>
EncoderLayout add_encoder_parameters(ParameterSet<T>& params, const EncoderConfig& cfg)
{
    cfg.validate();
    const auto d = static_cast<Eigen::Index>(cfg.d_model);
    const auto ff = static_cast<Eigen::Index>(cfg.d_ff);
    EncoderLayout layout;
    layout.token_embedding = params.add("encoder.token_embedding", static_cast<Eigen::Index>(cfg.vocab_size), d);
    layout.position_embedding =
        params.add("encoder.position_embedding", static_cast<Eigen::Index>(cfg.max_positions()), d);
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        auto p = "encoder.block" + std::to_string(l) + ".";
        EncoderLayout::Block b{};
        b.ln1_gamma = params.add(p + "ln1.gamma", 1, d, true);
        b.ln1_beta = params.add(p + "ln1.beta", 1, d, true);
        b.w_query = params.add(p + "attn.w_query", d, d);
        b.b_query = params.add(p + "attn.b_query", 1, d, true);
        b.w_key = params.add(p + "attn.w_key", d, d);
        b.b_key = params.add(p + "attn.b_key", 1, d, true);
        b.w_value = params.add(p + "attn.w_value", d, d);
        b.b_value = params.add(p + "attn.b_value", 1, d, true);
        b.w_out = params.add(p + "attn.w_out", d, d);
        b.b_out = params.add(p + "attn.b_out", 1, d, true);
        b.ln2_gamma = params.add(p + "ln2.gamma", 1, d, true);
        b.ln2_beta = params.add(p + "ln2.beta", 1, d, true);
        b.w_ff1 = params.add(p + "ff.w1", d, ff);
        b.b_ff1 = params.add(p + "ff.b1", 1, ff, true);
        b.w_ff2 = params.add(p + "ff.w2", ff, d);
        b.b_ff2 = params.add(p + "ff.b2", 1, d, true);
        layout.blocks.push_back(b);
    }
    layout.final_gamma = params.add("encoder.final_norm.gamma", 1, d, true);
    layout.final_beta = params.add("encoder.final_norm.beta", 1, d, true);
    return layout;
}

namespace {

template <typename T>
void fill_uniform(Matrix<T>& m, double limit, Rng& rng)
{
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = static_cast<T>((2.0 * rng.uniform() - 1.0) * limit);
    }
}

template <typename T>
void xavier(Matrix<T>& m, Rng& rng)
{
    fill_uniform(m, std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols())), rng);
}

}  // namespace

template <typename T>
void init_encoder_parameters(ParameterSet<T>& params, const EncoderLayout& layout, const EncoderConfig& cfg, Rng& rng)
{
    const double emb = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
    fill_uniform(params[layout.token_embedding].value, emb, rng);
    fill_uniform(params[layout.position_embedding].value, emb, rng);
    for (const auto& b : layout.blocks) {
        for (auto w : {b.w_query, b.w_key, b.w_value, b.w_out, b.w_ff1, b.w_ff2}) {
            xavier(params[w].value, rng);
        }
        for (auto bias : {b.ln1_beta, b.b_query, b.b_key, b.b_value, b.b_out, b.ln2_beta, b.b_ff1, b.b_ff2}) {
            params[bias].value.setZero();
        }
        params[b.ln1_gamma].value.setOnes();
        params[b.ln2_gamma].value.setOnes();
    }
    params[layout.final_gamma].value.setOnes();
    params[layout.final_beta].value.setZero();
}

template <typename T>
Var embed(const EncoderPass<T>& pass, const TokenSeq& seq)
{
    if (seq.ids.size() != seq.mask.size()) {
        throw InputError("token ids and mask differ in length");
    }
    if (seq.size() > pass.cfg.max_positions()) {
        throw InputError("sequence longer than the position table");
    }
    for (auto id : seq.ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= pass.cfg.vocab_size) {
            throw InputError("token id " + std::to_string(id) + " outside vocabulary of size " +
                             std::to_string(pass.cfg.vocab_size));
        }
    }
    std::vector<std::int32_t> positions(seq.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        positions[i] = static_cast<std::int32_t>(i);
    }
    auto& t = pass.tape;
    auto tok = t.gather_rows(pass.layout.token_embedding, seq.ids);
    auto pos = t.gather_rows(pass.layout.position_embedding, positions);
    auto h = t.add(tok, pos);
    if (pass.mode == Mode::Train) {
        h = t.dropout(h, static_cast<T>(pass.cfg.dropout), *pass.rng);
    }
    return h;
}

template <typename T>
Var transformer_block(const EncoderPass<T>& pass, std::size_t layer, Var hidden, std::span<const std::uint8_t> mask)
{
    if (layer >= pass.layout.blocks.size()) {
        throw StateError("block index out of range");
    }
    auto& t = pass.tape;
    const auto& b = pass.layout.blocks[layer];
    const bool train = pass.mode == Mode::Train;
    const T rate = static_cast<T>(pass.cfg.dropout);
    const auto dh = static_cast<Eigen::Index>(pass.cfg.head_dim());
    const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));

    auto a = t.layer_norm(hidden, t.param(b.ln1_gamma), t.param(b.ln1_beta));
    auto q = t.add_row(t.matmul(a, t.param(b.w_query)), t.param(b.b_query));
    auto k = t.add_row(t.matmul(a, t.param(b.w_key)), t.param(b.b_key));
    auto v = t.add_row(t.matmul(a, t.param(b.w_value)), t.param(b.b_value));
    std::vector<Var> heads;
    heads.reserve(pass.cfg.n_heads);
    for (std::size_t h = 0; h < pass.cfg.n_heads; ++h) {
        auto start = static_cast<Eigen::Index>(h) * dh;
        auto qh = t.slice_cols(q, start, dh);
        auto kh = t.slice_cols(k, start, dh);
        auto vh = t.slice_cols(v, start, dh);
        auto weights = t.masked_softmax(t.scale(t.matmul_nt(qh, kh), inv_sqrt), mask);
        heads.push_back(t.matmul(weights, vh));
    }
    auto ctx = heads.size() == 1 ? heads.front() : t.concat_cols(heads);
    auto attn = t.add_row(t.matmul(ctx, t.param(b.w_out)), t.param(b.b_out));
    if (train) {
        attn = t.dropout(attn, rate, *pass.rng);
    }
    auto h1 = t.add(hidden, attn);

    auto n2 = t.layer_norm(h1, t.param(b.ln2_gamma), t.param(b.ln2_beta));
    auto f = t.relu(t.add_row(t.matmul(n2, t.param(b.w_ff1)), t.param(b.b_ff1)));
    f = t.add_row(t.matmul(f, t.param(b.w_ff2)), t.param(b.b_ff2));
    if (train) {
        f = t.dropout(f, rate, *pass.rng);
    }
    return t.add(h1, f);
}

template <typename T>
Var mean_pool(const EncoderPass<T>& pass, Var hidden, std::span<const std::uint8_t> mask)
{
    return pass.tape.masked_mean_rows(hidden, mask);
}

template <typename T>
Var encode_sequence_untrimmed(const EncoderPass<T>& pass, const TokenSeq& seq)
{
    if (pass.mode == Mode::Train && pass.rng == nullptr) {
        throw StateError("training-mode encoding needs a random stream");
    }
    auto h = embed(pass, seq);
    for (std::size_t l = 0; l < pass.layout.blocks.size(); ++l) {
        h = transformer_block(pass, l, h, seq.mask);
    }
    auto& t = pass.tape;
    h = t.layer_norm(h, t.param(pass.layout.final_gamma), t.param(pass.layout.final_beta));
    return mean_pool(pass, h, seq.mask);
}

template <typename T>
Var encode_sequence(const EncoderPass<T>& pass, const TokenSeq& seq)
{
    if (seq.ids.size() != seq.mask.size()) {
        throw InputError("token ids and mask differ in length");
    }
    std::size_t keep = seq.mask.size();
    while (keep > 0 && seq.mask[keep - 1] == 0) {
        --keep;
    }
    if (keep == 0 || keep == seq.mask.size()) {
        return encode_sequence_untrimmed(pass, seq);
    }
    TokenSeq trimmed;
    trimmed.ids.assign(seq.ids.begin(), seq.ids.begin() + static_cast<std::ptrdiff_t>(keep));
    trimmed.mask.assign(seq.mask.begin(), seq.mask.begin() + static_cast<std::ptrdiff_t>(keep));
    return encode_sequence_untrimmed(pass, trimmed);
}

#define PRODSEARCH_INSTANTIATE(T)                                                                              \
    template EncoderLayout add_encoder_parameters<T>(ParameterSet<T>&, const EncoderConfig&);                  \
    template void init_encoder_parameters<T>(ParameterSet<T>&, const EncoderLayout&, const EncoderConfig&,     \
                                             Rng&);                                                            \
    template Var embed<T>(const EncoderPass<T>&, const TokenSeq&);                                             \
    template Var transformer_block<T>(const EncoderPass<T>&, std::size_t, Var, std::span<const std::uint8_t>); \
    template Var mean_pool<T>(const EncoderPass<T>&, Var, std::span<const std::uint8_t>);                      \
    template Var encode_sequence<T>(const EncoderPass<T>&, const TokenSeq&);                                   \
    template Var encode_sequence_untrimmed<T>(const EncoderPass<T>&, const TokenSeq&);

PRODSEARCH_INSTANTIATE(float)
PRODSEARCH_INSTANTIATE(double)

#undef PRODSEARCH_INSTANTIATE

}  // namespace prodsearch
