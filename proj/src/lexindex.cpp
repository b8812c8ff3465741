// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "prodsearch/lexindex.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "prodsearch/binary_io.hpp"
#include "prodsearch/text.hpp"

namespace prodsearch {
namespace {

constexpr std::string_view kIndexMagic = "PSIDX001";
constexpr std::uint32_t kIndexVersion = 1;

std::vector<std::string> unique_terms(std::span<const std::string> terms)
{
    std::set<std::string> s(terms.begin(), terms.end());
    return {s.begin(), s.end()};
}

}  // namespace

FieldedIndex FieldedIndex::build(const Catalog& catalog)
{
    if (catalog.empty()) {
        throw InputError("cannot index an empty catalog");
    }
    FieldedIndex idx;
    for (const auto& doc : catalog) {
        idx.m_doc_ids.push_back(doc.doc_id);
    }
    std::sort(idx.m_doc_ids.begin(), idx.m_doc_ids.end());
    for (std::uint32_t d = 0; d < idx.m_doc_ids.size(); ++d) {
        idx.m_doc_numbers.emplace(idx.m_doc_ids[d], d);
    }
    for (auto& lengths : idx.m_lengths) {
        lengths.assign(idx.m_doc_ids.size(), 0);
    }
    for (std::uint32_t d = 0; d < idx.m_doc_ids.size(); ++d) {
        const auto& doc = catalog.at(idx.m_doc_ids[d]);
        for (auto f : kAllFields) {
            auto terms = analyze_lexical(assemble_field_text(doc, f));
            idx.m_lengths[field_index(f)][d] = static_cast<std::uint32_t>(terms.size());
            std::map<std::string, std::uint32_t> counts;
            for (auto& t : terms) {
                ++counts[t];
            }
            for (const auto& [term, tf] : counts) {
                auto [it, inserted] = idx.m_term_ids.try_emplace(term, static_cast<std::uint32_t>(idx.m_terms.size()));
                if (inserted) {
                    idx.m_terms.push_back(term);
                    for (auto& field_postings : idx.m_postings) {
                        field_postings.emplace_back();
                    }
                }
                idx.m_postings[field_index(f)][it->second].push_back({d, tf});
            }
        }
    }
    idx.finalize();
    return idx;
}

void FieldedIndex::finalize()
{
    const auto n = m_doc_ids.size();
    for (auto f : kAllFields) {
        const auto& lengths = m_lengths[field_index(f)];
        double total = std::accumulate(lengths.begin(), lengths.end(), 0.0);
        m_avg_lengths[field_index(f)] = n == 0 ? 0.0 : total / static_cast<double>(n);
    }
    double total = 0.0;
    for (std::uint32_t d = 0; d < n; ++d) {
        total += doc_length(d);
    }
    m_avg_doc_length = n == 0 ? 0.0 : total / static_cast<double>(n);

    m_df.assign(m_terms.size(), 0);
    for (std::uint32_t t = 0; t < m_terms.size(); ++t) {
        std::set<std::uint32_t> docs;
        for (const auto& field_postings : m_postings) {
            for (const auto& p : field_postings[t]) {
                docs.insert(p.doc);
            }
        }
        m_df[t] = static_cast<std::uint32_t>(docs.size());
    }
}

std::optional<std::uint32_t> FieldedIndex::doc_number(std::string_view doc_id) const
{
    auto it = m_doc_numbers.find(std::string(doc_id));
    if (it == m_doc_numbers.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::optional<std::uint32_t> FieldedIndex::term_id(std::string_view term) const
{
    auto it = m_term_ids.find(std::string(term));
    if (it == m_term_ids.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::span<const Posting> FieldedIndex::postings(Field field, std::uint32_t term_id) const
{
    return m_postings[field_index(field)][term_id];
}

std::span<const Posting> FieldedIndex::postings(Field field, std::string_view term) const
{
    auto id = term_id(term);
    if (!id) {
        return {};
    }
    return postings(field, *id);
}

std::uint32_t FieldedIndex::df(std::string_view term) const
{
    auto id = term_id(term);
    return id ? m_df[*id] : 0;
}

std::uint32_t FieldedIndex::tf(Field field, std::uint32_t term_id, std::uint32_t doc) const
{
    auto list = postings(field, term_id);
    auto it = std::lower_bound(list.begin(), list.end(), doc,
                               [](const Posting& p, std::uint32_t d) { return p.doc < d; });
    return it != list.end() && it->doc == doc ? it->tf : 0;
}

std::uint32_t FieldedIndex::doc_length(std::uint32_t doc) const
{
    std::uint32_t len = 0;
    for (const auto& field_lengths : m_lengths) {
        len += field_lengths[doc];
    }
    return len;
}

void FieldedIndex::save(std::ostream& out) const
{
    using namespace binary;
    out.write(kIndexMagic.data(), static_cast<std::streamsize>(kIndexMagic.size()));
    put_u32(out, kIndexVersion);
    put_u32(out, static_cast<std::uint32_t>(kNumFields));
    put_u32(out, static_cast<std::uint32_t>(m_doc_ids.size()));
    for (const auto& id : m_doc_ids) {
        put_string(out, id);
    }
    put_u32(out, static_cast<std::uint32_t>(m_terms.size()));
    for (const auto& t : m_terms) {
        put_string(out, t);
    }
    for (std::size_t f = 0; f < kNumFields; ++f) {
        for (auto len : m_lengths[f]) {
            put_u32(out, len);
        }
        for (const auto& list : m_postings[f]) {
            put_u32(out, static_cast<std::uint32_t>(list.size()));
            for (const auto& p : list) {
                put_u32(out, p.doc);
                put_u32(out, p.tf);
            }
        }
    }
}

FieldedIndex FieldedIndex::load(std::istream& in)
{
    using namespace binary;
    expect_magic(in, kIndexMagic, "index");
    auto version = get_u32(in);
    if (version != kIndexVersion) {
        throw InputError("unsupported index version " + std::to_string(version));
    }
    if (get_u32(in) != kNumFields) {
        throw InputError("index field count mismatch");
    }
    FieldedIndex idx;
    auto n_docs = get_u32(in);
    for (std::uint32_t d = 0; d < n_docs; ++d) {
        idx.m_doc_ids.push_back(get_string(in));
        idx.m_doc_numbers.emplace(idx.m_doc_ids.back(), d);
    }
    auto n_terms = get_u32(in);
    for (std::uint32_t t = 0; t < n_terms; ++t) {
        idx.m_terms.push_back(get_string(in));
        idx.m_term_ids.emplace(idx.m_terms.back(), t);
    }
    for (std::size_t f = 0; f < kNumFields; ++f) {
        idx.m_lengths[f].resize(n_docs);
        for (auto& len : idx.m_lengths[f]) {
            len = get_u32(in);
        }
        idx.m_postings[f].resize(n_terms);
        for (auto& list : idx.m_postings[f]) {
            auto n = get_u32(in);
            if (n > n_docs) {
                throw InputError("index posting list longer than the document count");
            }
            list.resize(n);
            for (auto& p : list) {
                p.doc = get_u32(in);
                p.tf = get_u32(in);
                if (p.doc >= n_docs) {
                    throw InputError("index posting references an unknown document");
                }
            }
        }
    }
    idx.finalize();
    return idx;
}

void FieldedIndex::dump_postings(std::ostream& out, std::optional<std::string> term, std::optional<Field> field) const
{
    std::vector<std::uint32_t> order(m_terms.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [this](auto a, auto b) { return m_terms[a] < m_terms[b]; });
    for (auto f : kAllFields) {
        if (field && *field != f) {
            continue;
        }
        for (auto t : order) {
            if (term && *term != m_terms[t]) {
                continue;
            }
            const auto& list = m_postings[field_index(f)][t];
            if (list.empty()) {
                continue;
            }
            out << field_name(f) << '\t' << m_terms[t] << '\t' << m_df[t] << '\t';
            for (std::size_t i = 0; i < list.size(); ++i) {
                out << (i == 0 ? "" : " ") << m_doc_ids[list[i].doc] << ':' << list[i].tf;
            }
            out << '\n';
        }
    }
}

// ---------------------------------------------------------------------------

void Bm25Params::validate() const
{
    if (!(k1 > 0.0)) {
        throw InputError("k1 must be positive");
    }
    if (!(b >= 0.0 && b <= 1.0)) {
        throw InputError("b must lie in [0, 1]");
    }
    bool any_positive = false;
    for (std::size_t f = 0; f < kNumFields; ++f) {
        if (!(field_weight[f] >= 0.0)) {
            throw InputError("field weights must be non-negative");
        }
        if (!(field_b[f] >= 0.0 && field_b[f] <= 1.0)) {
            throw InputError("field b values must lie in [0, 1]");
        }
        any_positive = any_positive || field_weight[f] > 0.0;
    }
    if (!any_positive) {
        throw InputError("at least one field weight must be positive");
    }
}

void Bm25Params::save(std::ostream& out) const
{
    std::ostringstream s;
    s.precision(17);
    s << "k1 = " << k1 << "\nb = " << b << '\n';
    for (auto f : kAllFields) {
        s << "w." << field_name(f) << " = " << field_weight[field_index(f)] << '\n';
    }
    for (auto f : kAllFields) {
        s << "b." << field_name(f) << " = " << field_b[field_index(f)] << '\n';
    }
    out << s.str();
}

Bm25Params Bm25Params::load(std::istream& in)
{
    Bm25Params p;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos) {
                throw RecordError(line_no, "expected key = value");
            }
            continue;
        }
        auto trim = [](std::string s) {
            auto a = s.find_first_not_of(" \t\r");
            auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
        };
        auto key = trim(line.substr(0, eq));
        auto text = trim(line.substr(eq + 1));
        double value = 0.0;
        try {
            std::size_t used = 0;
            value = std::stod(text, &used);
            if (used != text.size()) {
                throw InputError("trailing characters");
            }
        } catch (const std::exception&) {
            throw RecordError(line_no, "value for '" + key + "' is not a number");
        }
        if (key == "k1") {
            p.k1 = value;
        } else if (key == "b") {
            p.b = value;
        } else if (key.size() > 2 && (key.starts_with("w.") || key.starts_with("b."))) {
            auto f = parse_field_name(key.substr(2));
            if (!f) {
                throw RecordError(line_no, "unknown field in '" + key + "'");
            }
            (key[0] == 'w' ? p.field_weight : p.field_b)[field_index(*f)] = value;
        } else {
            throw RecordError(line_no, "unknown parameter '" + key + "'");
        }
    }
    p.validate();
    return p;
}

LexicalScorer parse_lexical_scorer(std::string_view name)
{
    if (name == "bm25") {
        return LexicalScorer::Bm25;
    }
    if (name == "bm25f") {
        return LexicalScorer::Bm25F;
    }
    throw InputError("unknown scorer '" + std::string(name) + "' (expected bm25 or bm25f)");
}

double bm25_idf(std::size_t num_docs, std::size_t df)
{
    const auto n = static_cast<double>(num_docs);
    const auto d = static_cast<double>(df);
    return std::log((n - d + 0.5) / (d + 0.5) + 1.0);
}

namespace {

std::uint32_t require_doc(const FieldedIndex& index, std::string_view doc_id)
{
    auto d = index.doc_number(doc_id);
    if (!d) {
        throw InputError("doc_id " + std::string(doc_id) + " is not in the index");
    }
    return *d;
}

}  // namespace

double bm25_score(const FieldedIndex& index, std::span<const std::string> query_terms, std::string_view doc_id,
                  const Bm25Params& params)
{
    const auto doc = require_doc(index, doc_id);
    const double avg = index.avg_doc_length();
    const double norm = 1.0 - params.b + (avg > 0.0 ? params.b * index.doc_length(doc) / avg : 0.0);
    double score = 0.0;
    for (const auto& term : unique_terms(query_terms)) {
        auto id = index.term_id(term);
        if (!id) {
            continue;
        }
        double tf = 0.0;
        for (auto f : kAllFields) {
            tf += index.tf(f, *id, doc);
        }
        if (tf == 0.0) {
            continue;
        }
        score += bm25_idf(index.num_docs(), index.df(*id)) * tf * (params.k1 + 1.0) / (tf + params.k1 * norm);
    }
    return score;
}

double bm25f_score(const FieldedIndex& index, std::span<const std::string> query_terms, std::string_view doc_id,
                   const Bm25Params& params)
{
    const auto doc = require_doc(index, doc_id);
    double score = 0.0;
    for (const auto& term : unique_terms(query_terms)) {
        auto id = index.term_id(term);
        if (!id) {
            continue;
        }
        double pseudo = 0.0;
        for (auto f : kAllFields) {
            const auto fi = field_index(f);
            if (params.field_weight[fi] == 0.0) {
                continue;
            }
            const double tf = index.tf(f, *id, doc);
            if (tf == 0.0) {
                continue;
            }
            const double avg = index.avg_field_length(f);
            const double norm =
                1.0 - params.field_b[fi] + (avg > 0.0 ? params.field_b[fi] * index.field_length(f, doc) / avg : 0.0);
            pseudo += params.field_weight[fi] * tf / norm;
        }
        if (pseudo == 0.0) {
            continue;
        }
        score += bm25_idf(index.num_docs(), index.df(*id)) * pseudo * (params.k1 + 1.0) / (params.k1 + pseudo);
    }
    return score;
}

std::vector<RankedDoc> rank_lexical(const FieldedIndex& index, std::string_view query,
                                    std::span<const std::string> candidates, const Bm25Params& params,
                                    LexicalScorer scorer)
{
    auto terms = analyze_lexical(query);
    std::vector<RankedDoc> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        double s = scorer == LexicalScorer::Bm25 ? bm25_score(index, terms, c, params)
                                                 : bm25f_score(index, terms, c, params);
        out.push_back({c, s});
    }
    std::sort(out.begin(), out.end(), [](const RankedDoc& a, const RankedDoc& b) {
        return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
    });
    return out;
}

}  // namespace prodsearch
