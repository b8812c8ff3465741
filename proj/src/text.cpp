// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "prodsearch/text.hpp"

#include <algorithm>
#include <array>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "prodsearch/error.hpp"

namespace prodsearch {
namespace {

bool is_token_byte(unsigned char c)
{
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

// English stopwords applied before lexical indexing.
constexpr auto kStopwords = std::to_array<std::string_view>({
    "a",       "about",   "above",  "after",   "again",  "against", "all",     "am",       "an",
    "and",     "any",     "are",    "as",      "at",     "be",      "because", "been",     "before",
    "being",   "below",   "between", "both",   "but",    "by",      "can",     "could",    "did",
    "do",      "does",    "doing",  "down",    "during", "each",    "few",     "for",      "from",
    "further", "had",     "has",    "have",    "having", "he",      "her",     "here",     "hers",
    "herself", "him",     "himself", "his",    "how",    "i",       "if",      "in",       "into",
    "is",      "it",      "its",    "itself",  "just",   "me",      "more",    "most",     "my",
    "myself",  "no",      "nor",    "not",     "now",    "of",      "off",     "on",       "once",
    "only",    "or",      "other",  "ought",   "our",    "ours",    "ourselves", "out",    "over",
    "own",     "same",    "she",    "should",  "so",     "some",    "such",    "than",     "that",
    "the",     "their",   "theirs", "them",    "themselves", "then", "there",  "these",    "they",
    "this",    "those",   "through", "to",     "too",    "under",   "until",   "up",       "very",
    "was",     "we",      "were",   "what",    "when",   "where",   "which",   "while",    "who",
    "whom",    "why",     "will",   "with",    "would",  "you",     "your",    "yours",    "yourself",
    "yourselves",
});

}  // namespace

std::vector<std::string> tokenize(std::string_view text)
{
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (is_token_byte(c)) {
            cur += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) {
        tokens.push_back(std::move(cur));
    }
    return tokens;
}

bool is_stopword(std::string_view token)
{
    static const std::unordered_set<std::string_view> set(kStopwords.begin(), kStopwords.end());
    return set.contains(token);
}

std::vector<std::string> analyze_lexical(std::string_view text)
{
    std::vector<std::string> out;
    for (auto& tok : tokenize(text)) {
        if (!is_stopword(tok)) {
            out.push_back(stem(tok));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

Vocab::Vocab() : m_tokens{"[PAD]", "[UNK]"} {}

Vocab Vocab::build(const std::map<std::string, std::size_t>& counts, std::size_t min_freq)
{
    if (min_freq < 1) {
        throw InputError("min_freq must be >= 1");
    }
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (const auto& [tok, n] : counts) {
        if (n >= min_freq) {
            kept.emplace_back(tok, n);
        }
    }
    // counts is ordered, so a stable sort by count leaves ties lexicographic.
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocab v;
    for (auto& [tok, n] : kept) {
        v.m_ids.emplace(tok, static_cast<std::int32_t>(v.m_tokens.size()));
        v.m_tokens.push_back(tok);
    }
    return v;
}

Vocab Vocab::build(std::span<const std::string> tokens, std::size_t min_freq)
{
    std::map<std::string, std::size_t> counts;
    for (const auto& t : tokens) {
        ++counts[t];
    }
    return build(counts, min_freq);
}

std::int32_t Vocab::id(std::string_view token) const
{
    auto it = m_ids.find(std::string(token));
    return it == m_ids.end() ? kUnkId : it->second;
}

const std::string& Vocab::token(std::int32_t id) const
{
    if (id < 0 || static_cast<std::size_t>(id) >= m_tokens.size()) {
        throw InputError("token id out of range");
    }
    return m_tokens[static_cast<std::size_t>(id)];
}

void Vocab::save(std::ostream& out) const
{
    for (std::size_t i = 2; i < m_tokens.size(); ++i) {
        out << m_tokens[i] << '\n';
    }
}

Vocab Vocab::load(std::istream& in)
{
    Vocab v;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            throw InputError("vocab file contains an empty token at id " + std::to_string(v.m_tokens.size()));
        }
        if (!v.m_ids.emplace(line, static_cast<std::int32_t>(v.m_tokens.size())).second) {
            throw InputError("vocab file repeats token '" + line + "'");
        }
        v.m_tokens.push_back(line);
    }
    return v;
}

std::size_t TokenSeq::real_tokens() const noexcept
{
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

TokenSeq encode_ids(std::span<const std::string> tokens, const Vocab& vocab, std::size_t max_len)
{
    if (max_len < 1) {
        throw InputError("max_len must be >= 1");
    }
    TokenSeq seq;
    seq.ids.assign(max_len, kPadId);
    seq.mask.assign(max_len, 0);
    auto n = std::min(tokens.size(), max_len);
    for (std::size_t i = 0; i < n; ++i) {
        seq.ids[i] = vocab.id(tokens[i]);
        seq.mask[i] = 1;
    }
    return seq;
}

}  // namespace prodsearch
