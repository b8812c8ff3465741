// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "prodsearch/error.hpp"
#include "prodsearch/train.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace prodsearch;

namespace {

ModelConfig tiny(std::size_t vocab_size)
{
    ModelConfig c;
    c.encoder.d_model = 8;
    c.encoder.n_heads = 2;
    c.encoder.n_layers = 2;
    c.encoder.d_ff = 8;
    c.encoder.query_len = 4;
    c.encoder.field_len = 8;
    c.encoder.flat_len = 16;
    c.encoder.vocab_size = vocab_size;
    c.head_hidden = 8;
    return c;
}

struct Run {
    FitResult fit;
    std::string log;
};

Run train_tiny(const synthetic::Task& task, TrainConfig tc, bool with_validation = true)
{
    auto vocab = build_training_vocab(task.catalog, task.train);
    auto model = Model<float>::create(tiny(vocab.size()), tc.seed);
    std::span<const LabeledPair> validation;
    if (with_validation) {
        validation = task.train;
    }
    TrainData data{task.catalog, vocab, task.train, validation};
    std::ostringstream log;
    auto fit_result = fit(std::move(model), data, tc, &log);
    return {std::move(fit_result), log.str()};
}

TrainConfig quick()
{
    TrainConfig tc;
    tc.epochs = 2;
    tc.base_lr = 1e-3;
    tc.seed = 7;
    return tc;
}

}  // namespace

TEST_CASE("binary cross-entropy values")
{
    CHECK(bce_loss(0.5, 1.0) == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(bce_loss(0.9, 0.0) == doctest::Approx(2.302585).epsilon(1e-6));
    CHECK(bce_loss(1.0 - 1e-12, 1.0) < 1e-6);
    CHECK(bce_loss(0.0, 1.0) == doctest::Approx(-std::log(1e-7)));
    CHECK(std::isfinite(bce_loss(1.0, 0.0)));
}

TEST_CASE("learning-rate schedule")
{
    TrainConfig tc;
    CHECK(warmup_steps(1000, tc) == 100);
    CHECK(warmup_steps(3, tc) == 1);
    CHECK(warmup_steps(11, tc) == 2);
    CHECK(lr_at(50, 1000, tc) == doctest::Approx(5e-5));
    CHECK(lr_at(100, 1000, tc) == 1e-4);
    CHECK(lr_at(1000, 1000, tc) == 0.0);
    CHECK(lr_at(550, 1000, tc) == doctest::Approx(5e-5));
    double prev = 0.0;
    for (std::size_t s = 1; s <= 100; ++s) {
        CHECK(lr_at(s, 1000, tc) > prev);
        prev = lr_at(s, 1000, tc);
    }
    for (std::size_t s = 101; s <= 1000; ++s) {
        CHECK(lr_at(s, 1000, tc) < prev);
        prev = lr_at(s, 1000, tc);
    }
    CHECK_THROWS_AS(lr_at(1, 0, tc), InputError);
    CHECK_THROWS_AS(lr_at(1001, 1000, tc), InputError);
}

TEST_CASE("training config validation")
{
    CHECK_NOTHROW(TrainConfig{}.validate());
    TrainConfig tc;
    tc.warmup_fraction = 0.0;
    CHECK_THROWS_AS(tc.validate(), InputError);
    tc = TrainConfig{};
    tc.batch_size = 0;
    CHECK_THROWS_AS(tc.validate(), InputError);
    tc = TrainConfig{};
    tc.base_lr = -1.0;
    CHECK_THROWS_AS(tc.validate(), InputError);
    tc = TrainConfig{};
    tc.beta2 = 1.0;
    CHECK_THROWS_AS(tc.validate(), InputError);
}

TEST_CASE("Adam matches the scalar reference")
{
    ParameterSet<double> params;
    auto w = params.add("w", 1, 1);
    auto bias = params.add("bias", 1, 1, true);
    params[w].value(0, 0) = 0.5;
    params[bias].value(0, 0) = -0.25;
    TrainConfig tc;
    AdamState<double> state(params);
    GradientSet<double> g(params);
    oracle::ScalarAdam ref_w;
    oracle::ScalarAdam ref_b;
    TrainConfig no_decay = tc;
    no_decay.weight_decay = 0.0;
    double pw = 0.5;
    double pb = -0.25;
    for (int step = 1; step <= 5; ++step) {
        const double gw = 0.3 * step - 0.7;
        const double gb = 1.0;
        g[w](0, 0) = gw;
        g[bias](0, 0) = gb;
        adam_step(params, g, state, 1e-3, tc);
        pw = ref_w.step(pw, gw, 1e-3, tc);
        pb = ref_b.step(pb, gb, 1e-3, no_decay);
        CHECK(params[w].value(0, 0) == doctest::Approx(pw).epsilon(1e-12));
        CHECK(params[bias].value(0, 0) == doctest::Approx(pb).epsilon(1e-12));
    }
    CHECK(state.step == 5);
}

TEST_CASE("first Adam step moves by about the learning rate")
{
    ParameterSet<double> params;
    auto p = params.add("p", 1, 1);
    TrainConfig tc;
    tc.weight_decay = 0.0;
    AdamState<double> state(params);
    GradientSet<double> g(params);
    g[p](0, 0) = 1.0;
    adam_step(params, g, state, 1e-3, tc);
    CHECK(std::abs(params[p].value(0, 0)) == doctest::Approx(1e-3).epsilon(1e-6));
    // later steps with a constant gradient stay at about lr too
    adam_step(params, g, state, 1e-3, tc);
    CHECK(std::abs(params[p].value(0, 0)) == doctest::Approx(2e-3).epsilon(1e-6));
    CHECK(state.m[0](0, 0) == doctest::Approx(0.19));
    CHECK(state.v[0](0, 0) == doctest::Approx(1.0 - 0.999 * 0.999));
}

TEST_CASE("zero gradients without decay leave parameters unchanged")
{
    ParameterSet<float> params;
    auto p = params.add("p", 2, 3);
    params[p].value.setConstant(0.4F);
    TrainConfig tc;
    tc.weight_decay = 0.0;
    AdamState<float> state(params);
    GradientSet<float> g(params);
    for (int i = 0; i < 3; ++i) {
        adam_step(params, g, state, 1e-2, tc);
    }
    CHECK(params[p].value.isConstant(0.4F));

    tc.weight_decay = 0.5;
    adam_step(params, g, state, 1e-1, tc);
    CHECK(params[p].value(0, 0) == doctest::Approx(0.4 * (1.0 - 0.05)));
}

TEST_CASE("non-finite gradients abort and name the tensor")
{
    ParameterSet<double> params;
    params.add("encoder.ok", 1, 2);
    auto bad = params.add("head.w_out", 2, 1);
    AdamState<double> state(params);
    GradientSet<double> g(params);
    g[0].setConstant(1.0);
    g[bad](1, 0) = std::numeric_limits<double>::quiet_NaN();
    auto before = params[0].value;
    try {
        adam_step(params, g, state, 1e-3, TrainConfig{});
        FAIL("expected a NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("head.w_out") != std::string::npos);
    }
    CHECK(params[0].value == before);
    CHECK(state.step == 0);
    CHECK(state.m[0].isZero());
    g[bad](1, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(adam_step(params, g, state, 1e-3, TrainConfig{}), NumericError);
}

TEST_CASE("steps per epoch and the step log")
{
    auto task = synthetic::overfit_task(3, 8, 3);
    REQUIRE(task.train.size() == 32);
    auto run = train_tiny(task, quick());
    REQUIRE(run.fit.history.epochs.size() == 2);
    CHECK(run.fit.history.epochs[0].steps == 2);
    CHECK(run.fit.history.epochs[1].steps == 4);
    std::istringstream lines(run.log);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "step\tlr\tloss");
    std::size_t n = 0;
    std::string last;
    while (std::getline(lines, line)) {
        ++n;
        last = line;
    }
    CHECK(n == 4);
    CHECK(last.rfind("4\t0.000000e+00\t", 0) == 0);
}

TEST_CASE("training is reproducible and independent of thread count")
{
    auto task = synthetic::overfit_task(5, 8, 3);
    auto a = train_tiny(task, quick());
    auto b = train_tiny(task, quick());
    auto tc = quick();
    tc.threads = 3;
    auto c = train_tiny(task, tc);
    CHECK(a.log == b.log);
    CHECK(a.log == c.log);
    for (std::size_t i = 0; i < a.fit.model.params().size(); ++i) {
        CHECK(a.fit.model.params()[i].value == c.fit.model.params()[i].value);
    }
    tc = quick();
    tc.seed = 8;
    CHECK(train_tiny(task, tc).log != a.log);
}

TEST_CASE("gradients reach every layer")
{
    auto task = synthetic::overfit_task(2, 4, 1);
    auto vocab = build_training_vocab(task.catalog, task.train);
    auto cfg = tiny(vocab.size());
    auto model = Model<double>::create(cfg, 1);
    GradientSet<double> grads(model.params());
    for (const auto& lp : task.train) {
        auto pair = prepare_pair(lp.query, task.catalog.at(lp.doc_id), vocab, cfg, lp.label);
        Tape<double> t(model.params(), &grads);
        t.backward(t.bce(forward_pair(t, model, pair, Mode::Eval, nullptr), pair.label));
    }
    const auto& layout = model.encoder_layout();
    auto nonzero = [&](std::size_t i) { return grads[i].cwiseAbs().maxCoeff() > 0.0; };
    CHECK(nonzero(layout.token_embedding));
    CHECK(nonzero(layout.position_embedding));
    for (const auto& b : layout.blocks) {
        for (auto i : {b.ln1_gamma, b.w_query, b.w_key, b.w_value, b.w_out, b.ln2_gamma, b.w_ff1, b.w_ff2, b.b_ff2}) {
            CAPTURE(model.params()[i].name);
            CHECK(nonzero(i));
        }
    }
    CHECK(nonzero(layout.final_gamma));
    const auto& h = model.head_layout();
    CHECK(nonzero(h.w_hidden));
    CHECK(nonzero(h.w_out));
    CHECK(nonzero(h.b_out));
}

TEST_CASE("training lowers the loss on a small task")
{
    auto task = synthetic::overfit_task(11, 8, 3);
    auto tc = quick();
    tc.epochs = 30;
    tc.base_lr = 3e-3;
    auto run = train_tiny(task, tc);
    const auto& e = run.fit.history.epochs;
    CHECK(e.back().train_loss < e.front().train_loss);
    auto vocab = build_training_vocab(task.catalog, task.train);
    CHECK(evaluate_loss(run.fit.model, task.catalog, vocab, task.train) < e.front().train_loss);
    CHECK(run.fit.history.best_epoch >= 1);
    std::size_t marked = 0;
    for (const auto& r : e) {
        CHECK(r.validation_ndcg5.has_value());
        marked += r.best ? 1 : 0;
    }
    CHECK(marked == 1);
    CHECK(e[run.fit.history.best_epoch - 1].best);
}

TEST_CASE("empty validation keeps the last checkpoint with a warning")
{
    auto task = synthetic::overfit_task(3, 8, 3);
    auto run = train_tiny(task, quick(), false);
    CHECK_FALSE(run.fit.history.warnings.empty());
    CHECK(run.fit.history.best_epoch == 2);
    CHECK_FALSE(run.fit.history.epochs[0].validation_ndcg5.has_value());

    std::ostringstream out;
    write_history_jsonl(out, run.fit.history);
    CHECK(out.str().find("\"epoch\":1") != std::string::npos);
    CHECK(out.str().find("\"validation_ndcg@5\":null") != std::string::npos);
}

TEST_CASE("bad training data is rejected")
{
    auto task = synthetic::overfit_task(3, 4, 1);
    auto vocab = build_training_vocab(task.catalog, task.train);
    auto model = Model<float>::create(tiny(vocab.size()), 1);
    std::vector<LabeledPair> none;
    CHECK_THROWS_AS(fit(model, TrainData{task.catalog, vocab, none, {}}, quick()), InputError);
    auto graded = task.train;
    graded[0].label = 2;
    CHECK_THROWS_AS(fit(model, TrainData{task.catalog, vocab, graded, {}}, quick()), InputError);
    auto unknown = task.train;
    unknown[0].doc_id = "missing";
    CHECK_THROWS_AS(fit(model, TrainData{task.catalog, vocab, unknown, {}}, quick()), InputError);
}

TEST_CASE("training vocabulary covers queries and referenced documents")
{
    auto task = synthetic::overfit_task(3, 4, 1);
    auto vocab = build_training_vocab(task.catalog, task.train);
    for (const auto& lp : task.train) {
        for (const auto& tok : tokenize(lp.query)) {
            CHECK(vocab.id(tok) != kUnkId);
        }
    }
    CHECK(build_training_vocab(task.catalog, task.train, 1000).size() == 2);
}
