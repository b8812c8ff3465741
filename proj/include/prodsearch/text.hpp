// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace prodsearch {

/// Lowercases ASCII and splits on every byte that is not an ASCII letter or
/// digit. Bytes >= 0x80 are kept inside tokens so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

/// Porter stemmer (reference C implementation rules). Tokens containing
/// non-ASCII bytes, or shorter than three characters, are returned unchanged.
std::string stem(std::string_view token);

bool is_stopword(std::string_view token);

/// Lexical-path analysis: tokenize, drop stopwords, stem.
std::vector<std::string> analyze_lexical(std::string_view text);

inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kUnkId = 1;

class Vocab {
  public:
    /// Vocabulary holding only PAD and UNK.
    Vocab();

    /// Tokens with count >= min_freq get ids from 2 upward, by descending
    /// count, ties lexicographic.
    static Vocab build(const std::map<std::string, std::size_t>& counts, std::size_t min_freq = 1);
    static Vocab build(std::span<const std::string> tokens, std::size_t min_freq = 1);

    std::int32_t id(std::string_view token) const;
    const std::string& token(std::int32_t id) const;
    std::size_t size() const noexcept { return m_tokens.size(); }

    /// One token per line; line n holds id n + 2.
    void save(std::ostream& out) const;
    static Vocab load(std::istream& in);

    bool operator==(const Vocab& other) const { return m_tokens == other.m_tokens; }

  private:
    std::vector<std::string> m_tokens;
    std::unordered_map<std::string, std::int32_t> m_ids;
};

/// Fixed-length id sequence with its padding mask.
struct TokenSeq {
    std::vector<std::int32_t> ids;
    std::vector<std::uint8_t> mask;

    std::size_t size() const noexcept { return ids.size(); }
    std::size_t real_tokens() const noexcept;
};

/// Truncates to max_len, maps unknown tokens to UNK, pads with PAD.
TokenSeq encode_ids(std::span<const std::string> tokens, const Vocab& vocab, std::size_t max_len);

}  // namespace prodsearch
