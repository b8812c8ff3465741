// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "prodsearch/catalog.hpp"

namespace prodsearch {

/// Minimal RFC 4180 reader: quoted fields, doubled quotes, embedded newlines.
class CsvReader {
  public:
    explicit CsvReader(std::istream& in) : m_in(in) {}

    /// False at end of input.
    bool next(std::vector<std::string>& row);
    /// Physical line on which the last returned row started.
    std::size_t line() const noexcept { return m_row_line; }

  private:
    std::istream& m_in;
    std::size_t m_line = 1;
    std::size_t m_row_line = 0;
};

/// Field that a product attribute lands in, by attribute name prefix.
///   "MFG Brand Name"                           -> Brand
///   names with a unit suffix "(in.)", "(lb.)", ...
///   or starting with Width/Height/Depth/Length/Weight -> Numeric
///   "Bullet..."                                -> Description
///   everything else                            -> Metadata
Field attribute_field(std::string_view attribute_name);

struct PsrInputs {
    std::istream* train = nullptr;          // id, product_uid, [product_title,] search_term, relevance
    std::istream* descriptions = nullptr;   // product_uid, product_description (optional)
    std::istream* attributes = nullptr;     // product_uid, name, value (optional)
    double threshold = 2.5;
};

struct PsrDataset {
    Catalog catalog;
    std::vector<LabeledPair> pairs;
    std::vector<RecordError> errors;
    std::size_t rows = 0;
};

/// Joins the PSR CSV files into a catalog plus graded, binarized pairs.
/// Rows with unparseable or out-of-range relevance are reported in `errors`.
PsrDataset read_psr(const PsrInputs& inputs);

}  // namespace prodsearch
