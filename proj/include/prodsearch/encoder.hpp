// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "prodsearch/autograd.hpp"
#include "prodsearch/text.hpp"

namespace prodsearch {

struct EncoderConfig {
    std::size_t d_model = 64;
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    std::size_t d_ff = 128;
    std::size_t query_len = 16;
    std::size_t field_len = 64;
    /// Sequence length for a whole document encoded as one text.
    std::size_t flat_len = 128;
    std::size_t vocab_size = 2;
    double dropout = 0.1;

    /// Throws InputError when a dimension is zero, d_model is not a multiple
    /// of n_heads, or dropout is outside [0, 1).
    void validate() const;
    std::size_t max_positions() const;
    std::size_t head_dim() const { return d_model / n_heads; }

    bool operator==(const EncoderConfig&) const = default;
};

enum class Mode { Eval, Train };

/// Indices of the encoder tensors inside a ParameterSet.
struct EncoderLayout {
    struct Block {
        std::size_t ln1_gamma, ln1_beta;
        std::size_t w_query, b_query, w_key, b_key, w_value, b_value, w_out, b_out;
        std::size_t ln2_gamma, ln2_beta;
        std::size_t w_ff1, b_ff1, w_ff2, b_ff2;
    };
    std::size_t token_embedding = 0;
    std::size_t position_embedding = 0;
    std::vector<Block> blocks;
    std::size_t final_gamma = 0;
    std::size_t final_beta = 0;
};

template <typename T>
EncoderLayout add_encoder_parameters(ParameterSet<T>& params, const EncoderConfig& cfg);

/// Embeddings uniform in +-1/sqrt(d_model), projections Xavier-uniform,
/// biases zero, norm scales one.
template <typename T>
void init_encoder_parameters(ParameterSet<T>& params, const EncoderLayout& layout, const EncoderConfig& cfg,
                             Rng& rng);

/// Everything a forward pass through the encoder needs besides the input.
template <typename T>
struct EncoderPass {
    Tape<T>& tape;
    const EncoderConfig& cfg;
    const EncoderLayout& layout;
    Mode mode = Mode::Eval;
    Rng* rng = nullptr;  // required in Train mode
};

/// Token plus learned position embedding: L x d_model.
template <typename T>
Var embed(const EncoderPass<T>& pass, const TokenSeq& seq);

/// Pre-norm block: x + Attn(LN(x)), then x + FF(LN(x)). Masked keys get no
/// attention weight; a query row with no visible key gets a zero context.
template <typename T>
Var transformer_block(const EncoderPass<T>& pass, std::size_t layer, Var hidden, std::span<const std::uint8_t> mask);

/// Mean of rows where mask is 1; zero vector when none are.
template <typename T>
Var mean_pool(const EncoderPass<T>& pass, Var hidden, std::span<const std::uint8_t> mask);

/// embed -> blocks -> final norm -> mean_pool, giving 1 x d_model. Trailing
/// padding is dropped first; the result is unchanged because padded
/// positions are neither attended to nor pooled.
template <typename T>
Var encode_sequence(const EncoderPass<T>& pass, const TokenSeq& seq);

/// Same as encode_sequence without trimming trailing padding.
template <typename T>
Var encode_sequence_untrimmed(const EncoderPass<T>& pass, const TokenSeq& seq);

}  // namespace prodsearch
