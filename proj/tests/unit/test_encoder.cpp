// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "prodsearch/encoder.hpp"
#include "prodsearch/error.hpp"

using namespace prodsearch;

namespace {

struct Setup {
    EncoderConfig cfg;
    ParameterSet<double> params;
    EncoderLayout layout;

    explicit Setup(EncoderConfig c) : cfg(c)
    {
        layout = add_encoder_parameters(params, cfg);
        Rng rng(11);
        init_encoder_parameters(params, layout, cfg, rng);
    }
};

EncoderConfig small()
{
    EncoderConfig c;
    c.d_model = 8;
    c.n_heads = 2;
    c.n_layers = 2;
    c.d_ff = 12;
    c.query_len = 6;
    c.field_len = 6;
    c.flat_len = 10;
    c.vocab_size = 9;
    return c;
}

TokenSeq seq(std::vector<std::int32_t> ids, std::size_t len)
{
    TokenSeq s;
    s.ids = ids;
    s.mask.assign(ids.size(), 1);
    s.ids.resize(len, kPadId);
    s.mask.resize(len, 0);
    return s;
}

Matrix<double> encode(Setup& s, const TokenSeq& t, bool trimmed)
{
    Tape<double> tape(s.params, nullptr);
    EncoderPass<double> pass{tape, s.cfg, s.layout};
    return tape.value(trimmed ? encode_sequence(pass, t) : encode_sequence_untrimmed(pass, t));
}

}  // namespace

TEST_CASE("config validation")
{
    CHECK_NOTHROW(EncoderConfig{}.validate());
    CHECK(EncoderConfig{}.head_dim() == 16);
    CHECK(EncoderConfig{}.max_positions() >= 128);
    auto c = small();
    c.n_heads = 3;
    CHECK_THROWS_AS(c.validate(), InputError);
    c = small();
    c.n_layers = 0;
    CHECK_THROWS_AS(c.validate(), InputError);
    c = small();
    c.dropout = 1.0;
    CHECK_THROWS_AS(c.validate(), InputError);
    c = small();
    c.vocab_size = 1;
    CHECK_THROWS_AS(c.validate(), InputError);
}

TEST_CASE("parameter layout and initialization")
{
    Setup s(small());
    CHECK(s.layout.blocks.size() == 2);
    CHECK(s.params[s.layout.token_embedding].value.rows() == 9);
    CHECK(s.params[s.layout.token_embedding].value.cols() == 8);
    CHECK(s.params[s.layout.position_embedding].value.rows() == static_cast<Eigen::Index>(s.cfg.max_positions()));
    const auto& b = s.layout.blocks[0];
    CHECK(s.params[b.w_ff1].value.rows() == 8);
    CHECK(s.params[b.w_ff1].value.cols() == 12);
    CHECK(s.params[b.b_query].value.isZero());
    CHECK(s.params[b.b_query].no_decay);
    CHECK(s.params[b.ln1_gamma].value.isOnes());
    CHECK(s.params[b.ln1_gamma].no_decay);
    CHECK_FALSE(s.params[b.w_key].no_decay);
    const double bound = 1.0 / std::sqrt(8.0);
    CHECK(s.params[s.layout.token_embedding].value.cwiseAbs().maxCoeff() <= bound);

    Setup again(small());
    for (std::size_t i = 0; i < s.params.size(); ++i) {
        CHECK(s.params[i].value == again.params[i].value);
    }
}

TEST_CASE("trailing padding does not change the encoding")
{
    Setup s(small());
    std::mt19937_64 rng(4);
    for (int i = 0; i < 20; ++i) {
        std::vector<std::int32_t> ids(1 + rng() % 6);
        for (auto& id : ids) {
            id = 1 + static_cast<std::int32_t>(rng() % 8);
        }
        auto t = seq(ids, 6);
        auto a = encode(s, t, true);
        auto b = encode(s, t, false);
        CHECK(a.rows() == 1);
        CHECK(a.cols() == 8);
        CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);

        auto longer = seq(ids, 10);
        CHECK((encode(s, longer, false) - a).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("all-padding input pools to zero")
{
    Setup s(small());
    auto t = seq({}, 6);
    CHECK(encode(s, t, true).isZero());
    CHECK(encode(s, t, false).isZero());
    CHECK(encode(s, TokenSeq{}, true).isZero());
}

TEST_CASE("token order matters through positions")
{
    Setup s(small());
    auto ab = encode(s, seq({2, 3}, 6), true);
    auto ba = encode(s, seq({3, 2}, 6), true);
    CHECK((ab - ba).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("inputs are checked")
{
    Setup s(small());
    Tape<double> tape(s.params, nullptr);
    EncoderPass<double> pass{tape, s.cfg, s.layout};
    CHECK_THROWS_AS(encode_sequence(pass, seq({9}, 6)), InputError);
    auto bad = seq({2}, 6);
    bad.mask.pop_back();
    CHECK_THROWS_AS(encode_sequence(pass, bad), InputError);
    CHECK_THROWS_AS(encode_sequence_untrimmed(pass, seq({2}, s.cfg.max_positions() + 1)), InputError);
    EncoderPass<double> train{tape, s.cfg, s.layout, Mode::Train, nullptr};
    CHECK_THROWS_AS(encode_sequence(train, seq({2}, 6)), StateError);
}

TEST_CASE("train mode applies dropout reproducibly")
{
    Setup s(small());
    auto t = seq({1, 2, 3, 4}, 6);
    auto run = [&](std::uint64_t seed) {
        Tape<double> tape(s.params, nullptr);
        Rng rng(seed);
        EncoderPass<double> pass{tape, s.cfg, s.layout, Mode::Train, &rng};
        return Matrix<double>(tape.value(encode_sequence(pass, t)));
    };
    CHECK(run(1) == run(1));
    CHECK(run(1) != run(2));
    CHECK(run(1) != encode(s, t, true));
}
