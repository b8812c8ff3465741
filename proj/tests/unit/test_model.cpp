// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "prodsearch/error.hpp"
#include "prodsearch/model.hpp"

using namespace prodsearch;

namespace {

FieldedDocument door()
{
    FieldedDocument d;
    d.doc_id = "d1";
    d.instances(Field::Title) = {"Red Panel"};
    d.instances(Field::Description) = {"interior door", "solid core"};
    d.instances(Field::Numeric) = {"36in"};
    return d;
}

ModelConfig small(Variant v = Variant::Fielded)
{
    ModelConfig c;
    c.encoder.d_model = 8;
    c.encoder.n_heads = 2;
    c.encoder.n_layers = 1;
    c.encoder.d_ff = 8;
    c.encoder.query_len = 4;
    c.encoder.field_len = 6;
    c.encoder.flat_len = 12;
    c.head_hidden = 6;
    c.variant = v;
    return c;
}

Vocab vocab_for(const FieldedDocument& d)
{
    return Vocab::build(tokenize(flatten_document(d) + " red door 36in"));
}

}  // namespace

TEST_CASE("variant names")
{
    CHECK(variant_name(Variant::Fielded) == "fielded");
    CHECK(parse_variant("flat") == Variant::Flat);
    CHECK_THROWS_AS(parse_variant("bert"), InputError);
}

TEST_CASE("match matrix marks exact token hits per field")
{
    std::vector<std::string> q = {"red", "door"};
    auto m = build_match_matrix(q, door(), 16);
    CHECK(m.rows == 7);
    CHECK(m.cols == 16);
    CHECK(m.at(field_index(Field::Title), 0) == 1);
    CHECK(m.at(field_index(Field::Title), 1) == 0);
    CHECK(m.at(field_index(Field::Description), 1) == 1);
    for (std::size_t j = 0; j < 16; ++j) {
        CHECK(m.at(field_index(Field::Brand), j) == 0);
        if (j >= 2) {
            CHECK(m.at(field_index(Field::Title), j) == 0);
        }
    }
    std::vector<std::string> size = {"36in"};
    CHECK(build_match_matrix(size, door(), 4).at(field_index(Field::Numeric), 0) == 1);
    // tokens beyond query_len are dropped
    std::vector<std::string> lots = {"x", "y", "red"};
    CHECK(build_match_matrix(lots, door(), 2).cells.size() == 14);
    CHECK(build_match_matrix(lots, door(), 2).at(0, 1) == 0);

    auto flat = build_flat_match_row(q, door(), 4);
    CHECK(flat.rows == 1);
    CHECK(flat.cells == std::vector<std::uint8_t>{1, 1, 0, 0});
}

TEST_CASE("feature vector layout")
{
    ModelConfig c;
    CHECK(c.feature_length() == 1008);
    c.variant = Variant::Flat;
    CHECK(c.feature_length() == 64 + 64 + 16);
    CHECK(c.document_rows() == 1);

    QueryVector<double> q{Matrix<double>(1, 2)};
    q.values << 1.0, -2.0;
    Matrix<double> d(2, 2);
    d << 1.0, -2.0, 0.5, 3.0;
    MatchMatrix m{2, 3, {1, 0, 0, 0, 1, 1}};
    auto f = smm_features(q, d, m);
    CHECK(f == std::vector<double>{0.0, 0.0, 0.5, 5.0, 1.0, 4.0, 0.5, -6.0, 1, 0, 0, 0, 1, 1});

    QueryVector<double> zero{Matrix<double>::Zero(1, 2)};
    auto z = smm_features(zero, d, m);
    CHECK(z[0] == 1.0);
    CHECK(z[3] == 3.0);
    for (std::size_t i = 4; i < 8; ++i) {
        CHECK(z[i] == 0.0);
    }
    CHECK(broadcast_query(q, 3).rows() == 3);
    MatchMatrix wrong{3, 3, std::vector<std::uint8_t>(9, 0)};
    CHECK_THROWS_AS(smm_features(q, d, wrong), InputError);
    QueryVector<double> wide{Matrix<double>::Zero(1, 3)};
    CHECK_THROWS_AS(smm_features(wide, d, m), InputError);
}

TEST_CASE("zero head weights give one half")
{
    auto cfg = small();
    auto d = door();
    auto v = vocab_for(d);
    cfg.encoder.vocab_size = v.size();
    auto model = Model<double>::create(cfg, 3);
    const auto& h = model.head_layout();
    model.params()[h.w_out].value.setZero();
    model.params()[h.b_out].value.setZero();
    CHECK(score("red door", d, v, model) == 0.5);
    std::vector<double> feats(cfg.feature_length(), 0.3);
    CHECK(head_forward(std::span<const double>(feats), model) == 0.5);
    std::vector<double> short_feats(3, 0.0);
    CHECK_THROWS_AS(head_forward(std::span<const double>(short_feats), model), InputError);
}

TEST_CASE("scores are probabilities and invalid input is rejected")
{
    auto cfg = small();
    auto d = door();
    auto v = vocab_for(d);
    cfg.encoder.vocab_size = v.size();
    auto model = Model<double>::create(cfg, 8);
    for (const char* q : {"red door", "unknownword", "36in panel solid core red"}) {
        double s = score(q, d, v, model);
        CHECK(s > 0.0);
        CHECK(s < 1.0);
        CHECK(score_pair(q, d, v, model) == s);
    }
    auto bad = d;
    bad.instances(Field::Description).clear();
    CHECK_THROWS_AS(score("red", bad, v, model), InputError);
    CHECK_THROWS_AS(score("  ", d, v, model), InputError);
    CHECK_THROWS_AS(score_flat("red", d, v, model), InputError);

    auto fcfg = small(Variant::Flat);
    fcfg.encoder.vocab_size = v.size();
    auto flat = Model<double>::create(fcfg, 8);
    CHECK_THROWS_AS(score("red", d, v, flat), InputError);
    double s = score_flat("red door", d, v, flat);
    CHECK(s > 0.0);
    CHECK(s < 1.0);
    CHECK(score_pair("red door", d, v, flat) == s);
}

TEST_CASE("fielded encoding leaves absent fields at zero")
{
    auto cfg = small();
    auto d = door();
    auto v = vocab_for(d);
    cfg.encoder.vocab_size = v.size();
    auto model = Model<double>::create(cfg, 1);
    auto fm = encode_document_fields(d, v, model);
    CHECK(fm.present[field_index(Field::Title)]);
    CHECK_FALSE(fm.present[field_index(Field::Brand)]);
    CHECK(fm.rows.row(field_index(Field::Brand)).isZero());
    CHECK_FALSE(fm.rows.row(field_index(Field::Title)).isZero());
}

TEST_CASE("tape forward matches the direct scoring path")
{
    auto d = door();
    auto v = vocab_for(d);
    for (auto variant : {Variant::Fielded, Variant::Flat}) {
        auto cfg = small(variant);
        cfg.encoder.vocab_size = v.size();
        auto model = Model<double>::create(cfg, 5);
        auto pair = prepare_pair("red door", d, v, cfg, 1);
        CHECK(pair.label == 1.0F);
        CHECK(pair.document.size() == cfg.document_rows());
        Tape<double> t(model.params(), nullptr);
        double p = t.value(forward_pair(t, model, pair, Mode::Eval, nullptr))(0, 0);
        CHECK(p == doctest::Approx(score_pair("red door", d, v, model)).epsilon(1e-12));

        FeatureMask none{false, false, false};
        Tape<double> t2(model.params(), nullptr);
        double blank = t2.value(forward_pair(t2, model, pair, Mode::Eval, nullptr, none))(0, 0);
        CHECK(blank == doctest::Approx(score_pair("anything", d, v, model, none)).epsilon(1e-12));
    }
    auto cfg = small();
    cfg.encoder.vocab_size = v.size();
    CHECK_THROWS_AS(prepare_pair("", d, v, cfg), InputError);
}

TEST_CASE("same seed gives the same weights")
{
    auto cfg = small();
    cfg.encoder.vocab_size = 10;
    auto a = Model<float>::create(cfg, 42);
    auto b = Model<float>::create(cfg, 42);
    auto c = Model<float>::create(cfg, 43);
    bool differs = false;
    for (std::size_t i = 0; i < a.params().size(); ++i) {
        CHECK(a.params()[i].value == b.params()[i].value);
        differs = differs || a.params()[i].value != c.params()[i].value;
    }
    CHECK(differs);

    auto round = a.cast<double>().cast<float>();
    CHECK(round.params()[0].value == a.params()[0].value);

    auto params = a.params();
    params[0].value.resize(1, 1);
    CHECK_THROWS_AS(Model<float>::from_parameters(cfg, params), InputError);
    CHECK_THROWS_AS(Model<float>::from_parameters(cfg, ParameterSet<float>{}), InputError);
}

TEST_CASE("cached scorer equals direct scoring bit for bit")
{
    Catalog cat;
    auto d = door();
    cat.add(d);
    auto e = door();
    e.doc_id = "d2";
    e.instances(Field::Brand) = {"acme"};
    cat.add(e);
    auto v = vocab_for(d);
    for (auto variant : {Variant::Fielded, Variant::Flat}) {
        auto cfg = small(variant);
        cfg.encoder.vocab_size = v.size();
        auto model = Model<float>::create(cfg, 9);
        CachedScorer<float> cached(model, v, cat);
        for (const char* q : {"red door", "acme panel", "red door"}) {
            for (const auto& doc : cat) {
                CHECK(cached(q, doc.doc_id) == score_pair(q, doc, v, model));
            }
        }
        CHECK_THROWS_AS(cached("red", "nope"), InputError);
    }
}

TEST_CASE("model config validation")
{
    auto c = small();
    c.head_hidden = 0;
    CHECK_THROWS_AS(c.validate(), InputError);
    c = small();
    c.head_dropout = -0.1;
    CHECK_THROWS_AS(c.validate(), InputError);
}
