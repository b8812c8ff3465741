// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prodsearch/catalog.hpp"
#include "prodsearch/model.hpp"

namespace prodsearch {

/// Dropout rates live in ModelConfig so that a checkpoint carries them.
struct TrainConfig {
    double base_lr = 1e-4;
    std::size_t batch_size = 16;
    std::size_t epochs = 5;
    double warmup_fraction = 0.10;
    /// Decoupled weight decay, scaled by the current learning rate.
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 20200725;
    /// Worker threads for the per-pair forward/backward passes. Results do
    /// not depend on this value.
    std::size_t threads = 1;

    /// Throws InputError unless 0 < warmup_fraction < 1, batch_size >= 1,
    /// epochs >= 1, base_lr > 0, weight_decay >= 0 and the Adam constants
    /// are in range.
    void validate() const;
};

/// -(y ln s + (1 - y) ln(1 - s)) with s clamped to [1e-7, 1 - 1e-7].
double bce_loss(double s, double y);

/// ceil(warmup_fraction * total_steps), at least 1.
std::size_t warmup_steps(std::size_t total_steps, const TrainConfig& cfg);

/// base_lr * step / W up to W, then linear decay to zero at total_steps.
/// Throws InputError when total_steps is 0 or step > total_steps.
double lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg);

template <typename T>
struct AdamState {
    std::vector<Matrix<T>> m;
    std::vector<Matrix<T>> v;
    std::size_t step = 0;

    AdamState() = default;
    explicit AdamState(const ParameterSet<T>& params);
};

/// One bias-corrected Adam update with decoupled weight decay
/// (p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p); no decay on tensors
/// flagged no_decay). Throws NumericError naming the first tensor with a
/// non-finite gradient, leaving parameters and state untouched.
template <typename T>
void adam_step(ParameterSet<T>& params, const GradientSet<T>& grads, AdamState<T>& state, double lr,
               const TrainConfig& cfg);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    std::size_t steps = 0;  // cumulative optimizer steps
    double train_loss = 0.0;  // mean pair loss over the epoch
    std::optional<double> validation_ndcg5;
    bool best = false;  // the epoch whose weights were kept
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    std::vector<std::string> warnings;
};

struct FitResult {
    /// Best validation NDCG@5 checkpoint, or the final one when no
    /// validation query could be evaluated.
    Model<float> model;
    TrainHistory history;
};

struct TrainData {
    const Catalog& catalog;
    const Vocab& vocab;
    std::span<const LabeledPair> train;
    std::span<const LabeledPair> validation;
};

/// Mini-batch training with a seeded shuffle per epoch. `step_log`, when
/// given, receives a `step \t lr \t loss` header and one line per step.
/// Throws InputError on an empty training set or non-binary labels.
FitResult fit(Model<float> model, const TrainData& data, const TrainConfig& cfg, std::ostream* step_log = nullptr,
              const FeatureMask& features = {});

/// Mean BCE of the model in eval mode over the given pairs.
double evaluate_loss(const Model<float>& model, const Catalog& catalog, const Vocab& vocab,
                     std::span<const LabeledPair> pairs);

/// One JSON object per epoch.
void write_history_jsonl(std::ostream& out, const TrainHistory& history);

/// Vocabulary over the encoder tokens of the training queries and the
/// documents they reference.
Vocab build_training_vocab(const Catalog& catalog, std::span<const LabeledPair> train, std::size_t min_freq = 1);

extern template struct AdamState<float>;
extern template struct AdamState<double>;

}  // namespace prodsearch
