// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "prodsearch/train.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "prodsearch/eval.hpp"

namespace prodsearch {
namespace {

std::uint64_t splitmix(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b)
{
    return splitmix(splitmix(splitmix(seed) ^ a) ^ b);
}

// Stream tags keep the shuffle and dropout draws independent.
constexpr std::uint64_t kShuffleStream = 0x53485546464C45ULL;

void run_parallel(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& job)
{
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            job(i);
        }
        return;
    }
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t w = 0; w < threads; ++w) {
        workers.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += threads) {
                    job(i);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    workers.clear();
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

double validation_ndcg5(const Model<float>& model, const TrainData& data, std::span<const QueryGroup> groups,
                        std::vector<std::string>* warnings)
{
    CachedScorer<float> scorer(model, data.vocab, data.catalog);
    auto report = evaluate_run([&](const std::string& q, const std::string& d) { return double(scorer(q, d)); },
                               groups, {5});
    if (warnings != nullptr) {
        warnings->insert(warnings->end(), report.warnings.begin(), report.warnings.end());
    }
    return report.per_query.empty() ? std::nan("") : report.mean.ndcg[0];
}

}  // namespace

void TrainConfig::validate() const
{
    if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) {
        throw InputError("warmup_fraction must lie in (0, 1)");
    }
    if (batch_size < 1) {
        throw InputError("batch_size must be >= 1");
    }
    if (epochs < 1) {
        throw InputError("epochs must be >= 1");
    }
    if (!(base_lr > 0.0) || !std::isfinite(base_lr)) {
        throw InputError("base_lr must be positive");
    }
    if (!(weight_decay >= 0.0)) {
        throw InputError("weight_decay must be non-negative");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
        throw InputError("Adam constants out of range");
    }
}

double bce_loss(double s, double y)
{
    s = std::clamp(s, 1e-7, 1.0 - 1e-7);
    return -(y * std::log(s) + (1.0 - y) * std::log(1.0 - s));
}

std::size_t warmup_steps(std::size_t total_steps, const TrainConfig& cfg)
{
    auto w = static_cast<std::size_t>(std::ceil(cfg.warmup_fraction * static_cast<double>(total_steps) - 1e-9));
    return std::clamp<std::size_t>(w, 1, std::max<std::size_t>(total_steps, 1));
}

double lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg)
{
    if (total_steps == 0) {
        throw InputError("learning-rate schedule needs at least one step");
    }
    if (step > total_steps) {
        throw InputError("step " + std::to_string(step) + " is past the end of the schedule");
    }
    const auto w = warmup_steps(total_steps, cfg);
    if (step <= w) {
        return cfg.base_lr * (static_cast<double>(step) / static_cast<double>(w));
    }
    if (total_steps == w) {
        return cfg.base_lr;
    }
    return cfg.base_lr * (static_cast<double>(total_steps - step) / static_cast<double>(total_steps - w));
}

template <typename T>
AdamState<T>::AdamState(const ParameterSet<T>& params)
{
    for (const auto& p : params) {
        m.push_back(Matrix<T>::Zero(p.value.rows(), p.value.cols()));
        v.push_back(Matrix<T>::Zero(p.value.rows(), p.value.cols()));
    }
}

template <typename T>
void adam_step(ParameterSet<T>& params, const GradientSet<T>& grads, AdamState<T>& state, double lr,
               const TrainConfig& cfg)
{
    if (grads.size() != params.size() || state.m.size() != params.size()) {
        throw StateError("optimizer state does not match the parameter set");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].rows() != params[i].value.rows() || grads[i].cols() != params[i].value.cols()) {
            throw StateError("gradient shape mismatch for " + params[i].name);
        }
        if (!grads[i].allFinite()) {
            throw NumericError("non-finite gradient in tensor " + params[i].name);
        }
    }
    ++state.step;
    const auto b1 = static_cast<T>(cfg.beta1);
    const auto b2 = static_cast<T>(cfg.beta2);
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    const auto step_size = static_cast<T>(lr / c1);
    const auto inv_c2 = static_cast<T>(1.0 / c2);
    const auto eps = static_cast<T>(cfg.epsilon);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i].value;
        const auto& g = grads[i];
        auto& m = state.m[i];
        auto& v = state.v[i];
        m = b1 * m + (T(1) - b1) * g;
        v = b2 * v + (T(1) - b2) * g.cwiseProduct(g);
        if (!params[i].no_decay && cfg.weight_decay > 0.0) {
            p *= static_cast<T>(1.0 - lr * cfg.weight_decay);
        }
        p.array() -= step_size * m.array() / ((v.array() * inv_c2).sqrt() + eps);
    }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(ParameterSet<float>&, const GradientSet<float>&, AdamState<float>&, double,
                               const TrainConfig&);
template void adam_step<double>(ParameterSet<double>&, const GradientSet<double>&, AdamState<double>&, double,
                                const TrainConfig&);

FitResult fit(Model<float> model, const TrainData& data, const TrainConfig& cfg, std::ostream* step_log,
              const FeatureMask& features)
{
    cfg.validate();
    if (data.train.empty()) {
        throw InputError("training set is empty");
    }
    std::vector<PreparedPair> prepared;
    prepared.reserve(data.train.size());
    for (const auto& p : data.train) {
        if (p.label != 0 && p.label != 1) {
            throw InputError("training label for (" + p.query + ", " + p.doc_id + ") is not binary");
        }
        prepared.push_back(prepare_pair(p.query, data.catalog.at(p.doc_id), data.vocab, model.config(), p.label));
    }
    auto validation_groups = group_by_query(data.validation);

    const std::size_t n = prepared.size();
    const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = steps_per_epoch * cfg.epochs;

    FitResult result{model, {}};
    if (validation_groups.empty()) {
        result.history.warnings.emplace_back("validation set is empty; keeping the last checkpoint");
    }
    AdamState<float> adam(model.params());
    std::vector<GradientSet<float>> pair_grads(std::min(cfg.batch_size, n), GradientSet<float>(model.params()));
    GradientSet<float> batch_grad(model.params());
    std::vector<double> pair_loss(pair_grads.size());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    if (step_log != nullptr) {
        *step_log << "step\tlr\tloss\n";
    }
    std::optional<double> best;
    std::size_t step = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng shuffle_rng(mix(cfg.seed, kShuffleStream, epoch));
        for (std::size_t i = n; i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.next() % i]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            ++step;
            const std::size_t count = std::min(cfg.batch_size, n - start);
            run_parallel(count, cfg.threads, [&](std::size_t j) {
                auto& g = pair_grads[j];
                g.zero();
                Rng rng(mix(cfg.seed, step, j));
                Tape<float> tape(model.params(), &g);
                const auto& pair = prepared[order[start + j]];
                auto prob = forward_pair(tape, model, pair, Mode::Train, &rng, features);
                auto loss = tape.bce(prob, pair.label);
                pair_loss[j] = tape.value(loss)(0, 0);
                tape.backward(loss);
            });
            batch_grad.zero();
            double loss = 0.0;
            for (std::size_t j = 0; j < count; ++j) {
                batch_grad += pair_grads[j];
                loss += pair_loss[j];
            }
            batch_grad.scale(1.0F / static_cast<float>(count));
            epoch_loss += loss;
            loss /= static_cast<double>(count);
            const double lr = lr_at(step, total_steps, cfg);
            adam_step(model.params(), batch_grad, adam, lr, cfg);
            if (step_log != nullptr) {
                *step_log << step << '\t' << std::scientific << std::setprecision(6) << lr << '\t' << std::fixed
                          << std::setprecision(6) << loss << '\n'
                          << std::defaultfloat;
            }
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.steps = step;
        rec.train_loss = epoch_loss / static_cast<double>(n);
        if (!validation_groups.empty()) {
            std::vector<std::string> warnings;
            double v = validation_ndcg5(model, data, validation_groups, epoch == 1 ? &warnings : nullptr);
            result.history.warnings.insert(result.history.warnings.end(), warnings.begin(), warnings.end());
            if (!std::isnan(v)) {
                rec.validation_ndcg5 = v;
                if (!best || v > *best) {
                    best = v;
                    result.model = model;
                    result.history.best_epoch = epoch;
                }
            }
        }
        result.history.epochs.push_back(rec);
    }
    if (!best) {
        if (!validation_groups.empty()) {
            result.history.warnings.emplace_back("no validation query could be evaluated; keeping the last checkpoint");
        }
        result.model = model;
        result.history.best_epoch = cfg.epochs;
    }
    result.history.epochs[result.history.best_epoch - 1].best = true;
    return result;
}

double evaluate_loss(const Model<float>& model, const Catalog& catalog, const Vocab& vocab,
                     std::span<const LabeledPair> pairs)
{
    if (pairs.empty()) {
        return 0.0;
    }
    CachedScorer<float> scorer(model, vocab, catalog);
    double total = 0.0;
    for (const auto& p : pairs) {
        total += bce_loss(scorer(p.query, p.doc_id), p.label);
    }
    return total / static_cast<double>(pairs.size());
}

void write_history_jsonl(std::ostream& out, const TrainHistory& history)
{
    for (const auto& e : history.epochs) {
        nlohmann::ordered_json j;
        j["epoch"] = e.epoch;
        j["steps"] = e.steps;
        j["train_loss"] = e.train_loss;
        j["validation_ndcg@5"] = e.validation_ndcg5 ? nlohmann::ordered_json(*e.validation_ndcg5) : nullptr;
        j["best"] = e.best;
        out << j.dump() << '\n';
    }
}

Vocab build_training_vocab(const Catalog& catalog, std::span<const LabeledPair> train, std::size_t min_freq)
{
    std::map<std::string, std::size_t> counts;
    std::map<std::string, bool> seen_docs;
    for (const auto& p : train) {
        for (auto& t : tokenize(p.query)) {
            ++counts[t];
        }
        if (seen_docs.emplace(p.doc_id, true).second) {
            const auto& doc = catalog.at(p.doc_id);
            for (auto f : kAllFields) {
                for (auto& t : tokenize(assemble_field_text(doc, f))) {
                    ++counts[t];
                }
            }
        }
    }
    return Vocab::build(counts, min_freq);
}

}  // namespace prodsearch
