// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prodsearch {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Bad user-supplied data or arguments. The CLI maps this to exit code 2.
class InputError : public Error {
  public:
    using Error::Error;
};

/// A single malformed record inside an otherwise readable stream.
class RecordError : public InputError {
  public:
    RecordError(std::size_t line, const std::string& what)
        : InputError("line " + std::to_string(line) + ": " + what), m_line(line)
    {}

    std::size_t line() const noexcept { return m_line; }

  private:
    std::size_t m_line;
};

/// API misuse, e.g. requesting gradients before a forward pass was recorded.
class StateError : public Error {
  public:
    using Error::Error;
};

/// NaN or infinity where finite values are required.
class NumericError : public Error {
  public:
    using Error::Error;
};

}  // namespace prodsearch
