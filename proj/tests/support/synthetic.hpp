// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded synthetic corpora for the training and ablation checks.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prodsearch/catalog.hpp"

namespace synthetic {

struct Task {
    prodsearch::Catalog catalog;
    std::vector<prodsearch::LabeledPair> train;
    std::vector<prodsearch::LabeledPair> validation;
    std::vector<prodsearch::LabeledPair> test;
};

/// Distinct lowercase pseudo-words (consonant-vowel syllables).
std::vector<std::string> words(std::size_t n, std::uint64_t seed);

/// `docs` products and `docs` queries. Query i is two words of product i's
/// title and has product i as its only relevant candidate plus `negatives`
/// random other products. Everything lands in `train`.
Task overfit_task(std::uint64_t seed, std::size_t docs = 64, std::size_t negatives = 3);

/// Queries "<brand> <type>". Every candidate mentions both words, but only
/// the product whose Brand field holds the brand is relevant; the others
/// carry it in Title or Description. Brands are disjoint across splits.
Task field_task(std::uint64_t seed, std::size_t train_queries = 48, std::size_t validation_queries = 8,
                std::size_t test_queries = 24, std::size_t negatives = 2);

}  // namespace synthetic
