// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "prodsearch/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace prodsearch {
namespace {

constexpr std::array<std::string_view, kNumFields> kFieldNames = {
    "title", "description", "category", "metadata", "brand", "numeric", "search_terms",
};

bool is_blank(std::string_view s)
{
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::vector<std::string_view> split_tabs(std::string_view line)
{
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            cols.push_back(line.substr(start));
            break;
        }
        cols.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cols;
}

std::string_view strip_cr(std::string_view line)
{
    if (!line.empty() && line.back() == '\r') {
        line.remove_suffix(1);
    }
    return line;
}

}  // namespace

std::string_view field_name(Field f) noexcept { return kFieldNames[field_index(f)]; }

std::optional<Field> parse_field_name(std::string_view name) noexcept
{
    for (auto f : kAllFields) {
        if (kFieldNames[field_index(f)] == name) {
            return f;
        }
    }
    return std::nullopt;
}

bool FieldedDocument::has_field(Field f) const
{
    const auto& inst = instances(f);
    return std::any_of(inst.begin(), inst.end(), [](const std::string& s) { return !is_blank(s); });
}

std::size_t FieldedDocument::non_empty_fields() const
{
    return static_cast<std::size_t>(
        std::count_if(kAllFields.begin(), kAllFields.end(), [this](Field f) { return has_field(f); }));
}

bool FieldedDocument::is_valid() const
{
    return has_field(Field::Title) && has_field(Field::Description) && non_empty_fields() >= 2;
}

void check_document_shape(const FieldedDocument& doc)
{
    if (doc.doc_id.empty()) {
        throw InputError("document with empty doc_id");
    }
    if (doc.instances(Field::Title).size() > 1) {
        throw InputError("document " + doc.doc_id + ": title has more than one instance");
    }
}

void Catalog::add(FieldedDocument doc)
{
    check_document_shape(doc);
    if (m_by_id.contains(doc.doc_id)) {
        throw InputError("duplicate doc_id " + doc.doc_id);
    }
    m_by_id.emplace(doc.doc_id, m_docs.size());
    m_docs.push_back(std::move(doc));
}

const FieldedDocument* Catalog::find(std::string_view doc_id) const
{
    auto it = m_by_id.find(std::string(doc_id));
    return it == m_by_id.end() ? nullptr : &m_docs[it->second];
}

const FieldedDocument& Catalog::at(std::string_view doc_id) const
{
    if (const auto* doc = find(doc_id)) {
        return *doc;
    }
    throw InputError("unknown doc_id " + std::string(doc_id));
}

Catalog read_catalog(std::istream& in)
{
    Catalog catalog;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) {
            continue;
        }
        FieldedDocument doc;
        try {
            auto j = nlohmann::json::parse(line);
            doc.doc_id = j.at("doc_id").get<std::string>();
            if (j.contains("fields")) {
                for (const auto& [key, value] : j.at("fields").items()) {
                    auto f = parse_field_name(key);
                    if (!f) {
                        throw RecordError(line_no, "unknown field '" + key + "'");
                    }
                    doc.instances(*f) = value.get<std::vector<std::string>>();
                }
            }
            catalog.add(std::move(doc));
        } catch (const RecordError&) {
            throw;
        } catch (const std::exception& e) {
            throw RecordError(line_no, e.what());
        }
    }
    return catalog;
}

void write_catalog(std::ostream& out, const Catalog& catalog)
{
    for (const auto& doc : catalog) {
        nlohmann::ordered_json j;
        j["doc_id"] = doc.doc_id;
        auto& fields = j["fields"];
        for (auto f : kAllFields) {
            fields[std::string(field_name(f))] = doc.instances(f);
        }
        out << j.dump() << '\n';
    }
}

// ---------------------------------------------------------------------------

ClickTriple parse_click_line(std::string_view line, std::size_t line_no)
{
    auto cols = split_tabs(strip_cr(line));
    if (cols.size() != 3) {
        throw RecordError(line_no, "expected 3 tab-separated columns, got " + std::to_string(cols.size()));
    }
    if (cols[0].empty() || cols[1].empty()) {
        throw RecordError(line_no, "empty query or doc_id");
    }
    std::int64_t clicks = 0;
    auto text = cols[2];
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), clicks);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw RecordError(line_no, "clicks is not an integer: '" + std::string(text) + "'");
    }
    if (clicks < 0) {
        throw RecordError(line_no, "negative clicks");
    }
    return {std::string(cols[0]), std::string(cols[1]), clicks};
}

ClickParseResult parse_click_triples(std::istream& in)
{
    ClickParseResult result;
    std::string line;
    while (std::getline(in, line)) {
        ++result.lines;
        if (is_blank(line)) {
            continue;
        }
        try {
            result.triples.push_back(parse_click_line(line, result.lines));
        } catch (const RecordError& e) {
            result.errors.push_back(e);
        }
    }
    return result;
}

int binarize_clicks(std::int64_t clicks, std::int64_t threshold) { return clicks >= threshold ? 1 : 0; }

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

int binarize_psr(double graded, double threshold)
{
    if (!(graded >= 1.0 && graded <= 3.0)) {
        throw InputError("graded relevance outside [1, 3]");
    }
    return static_cast<double>(round_half_up(graded)) >= threshold ? 1 : 0;
}

bool query_text_acceptable(std::string_view query)
{
    // Length counts bytes of the trimmed query.
    auto first = query.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return false;
    }
    auto last = query.find_last_not_of(" \t\r\n");
    auto trimmed = query.substr(first, last - first + 1);
    if (trimmed.size() < 3) {
        return false;
    }
    return std::any_of(trimmed.begin(), trimmed.end(),
                       [](unsigned char c) { return !(std::isdigit(c) || std::isspace(c)); });
}

std::vector<LabeledPair> label_click_triples(std::span<const ClickTriple> triples, std::int64_t threshold)
{
    std::vector<LabeledPair> pairs;
    pairs.reserve(triples.size());
    for (const auto& t : triples) {
        pairs.push_back({t.query, t.doc_id, binarize_clicks(t.clicks, threshold), ClickCount{t.clicks}});
    }
    return pairs;
}

std::vector<LabeledPair> filter_queries(std::span<const LabeledPair> pairs)
{
    std::unordered_set<std::string> has_relevant;
    for (const auto& p : pairs) {
        if (p.label == 1) {
            has_relevant.insert(p.query);
        }
    }
    std::vector<LabeledPair> kept;
    for (const auto& p : pairs) {
        if (has_relevant.contains(p.query) && query_text_acceptable(p.query)) {
            kept.push_back(p);
        }
    }
    return kept;
}

std::unordered_map<std::string, std::vector<std::string>> build_search_terms(
    std::span<const ClickTriple> train_triples, std::size_t top_k)
{
    std::unordered_map<std::string, std::map<std::string, std::int64_t>> totals;
    for (const auto& t : train_triples) {
        if (t.clicks >= 1) {
            totals[t.doc_id][t.query] += t.clicks;
        }
    }
    std::unordered_map<std::string, std::vector<std::string>> out;
    for (auto& [doc, per_query] : totals) {
        std::vector<std::pair<std::string, std::int64_t>> ranked(per_query.begin(), per_query.end());
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        auto& terms = out[doc];
        for (std::size_t i = 0; i < ranked.size() && i < top_k; ++i) {
            terms.push_back(ranked[i].first);
        }
    }
    return out;
}

std::vector<std::string> build_search_terms_field(std::span<const ClickTriple> train_triples,
                                                  std::string_view doc_id, std::size_t top_k)
{
    std::vector<ClickTriple> mine;
    for (const auto& t : train_triples) {
        if (t.doc_id == doc_id) {
            mine.push_back(t);
        }
    }
    auto all = build_search_terms(mine, top_k);
    auto it = all.find(std::string(doc_id));
    return it == all.end() ? std::vector<std::string>{} : it->second;
}

std::string assemble_field_text(const FieldedDocument& doc, Field field)
{
    std::string out;
    for (const auto& inst : doc.instances(field)) {
        if (!out.empty()) {
            out += ' ';
        }
        out += inst;
    }
    return out;
}

std::string flatten_document(const FieldedDocument& doc)
{
    std::string out;
    for (auto f : kAllFields) {
        auto text = assemble_field_text(doc, f);
        if (text.empty()) {
            continue;
        }
        if (!out.empty()) {
            out += ' ';
        }
        out += text;
    }
    return out;
}

// ---------------------------------------------------------------------------

DatasetSplits split_by_query(std::span<const LabeledPair> pairs, const SplitConfig& cfg)
{
    std::vector<std::string> queries;
    std::unordered_set<std::string> seen;
    for (const auto& p : pairs) {
        if (seen.insert(p.query).second) {
            queries.push_back(p.query);
        }
    }
    std::sort(queries.begin(), queries.end());
    std::mt19937_64 rng(cfg.seed);
    // Fisher-Yates with an explicit draw so the permutation does not depend on
    // the standard library's shuffle implementation.
    for (std::size_t i = queries.size(); i > 1; --i) {
        std::size_t j = rng() % i;
        std::swap(queries[i - 1], queries[j]);
    }

    auto count_for = [&](std::optional<std::size_t> absolute, double fraction) {
        if (absolute) {
            return *absolute;
        }
        return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(queries.size())));
    };
    std::size_t n_val = std::min(count_for(cfg.validation_queries, cfg.validation_fraction), queries.size());
    std::size_t n_test = std::min(count_for(cfg.test_queries, cfg.test_fraction), queries.size() - n_val);

    std::unordered_map<std::string, int> split_of;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        split_of[queries[i]] = i < n_val ? 1 : (i < n_val + n_test ? 2 : 0);
    }
    DatasetSplits out;
    for (const auto& p : pairs) {
        switch (split_of[p.query]) {
        case 1: out.validation.push_back(p); break;
        case 2: out.test.push_back(p); break;
        default: out.train.push_back(p); break;
        }
    }
    return out;
}

void write_pairs(std::ostream& out, std::span<const LabeledPair> pairs)
{
    for (const auto& p : pairs) {
        out << p.query << '\t' << p.doc_id << '\t' << p.label << '\t';
        if (const auto* c = std::get_if<ClickCount>(&p.raw_signal)) {
            out << "c:" << c->value;
        } else if (const auto* g = std::get_if<GradedScore>(&p.raw_signal)) {
            std::ostringstream s;
            s << std::setprecision(17) << g->value;
            out << "g:" << s.str();
        }
        out << '\n';
    }
}

std::vector<LabeledPair> read_pairs(std::istream& in)
{
    std::vector<LabeledPair> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) {
            continue;
        }
        auto cols = split_tabs(strip_cr(line));
        if (cols.size() < 3 || cols.size() > 4) {
            throw RecordError(line_no, "expected query, doc_id, label[, signal]");
        }
        LabeledPair p{std::string(cols[0]), std::string(cols[1]), 0, {}};
        if (cols[2] == "1") {
            p.label = 1;
        } else if (cols[2] != "0") {
            throw RecordError(line_no, "label must be 0 or 1");
        }
        if (cols.size() == 4 && !cols[3].empty()) {
            auto sig = cols[3];
            try {
                if (sig.starts_with("c:")) {
                    p.raw_signal = ClickCount{std::stoll(std::string(sig.substr(2)))};
                } else if (sig.starts_with("g:")) {
                    p.raw_signal = GradedScore{std::stod(std::string(sig.substr(2)))};
                } else {
                    throw RecordError(line_no, "signal must start with c: or g:");
                }
            } catch (const RecordError&) {
                throw;
            } catch (const std::exception&) {
                throw RecordError(line_no, "unparseable signal");
            }
        }
        pairs.push_back(std::move(p));
    }
    return pairs;
}

std::vector<QueryGroup> group_by_query(std::span<const LabeledPair> pairs)
{
    std::vector<QueryGroup> groups;
    std::unordered_map<std::string, std::size_t> where;
    for (const auto& p : pairs) {
        auto [it, inserted] = where.try_emplace(p.query, groups.size());
        if (inserted) {
            groups.push_back({p.query, {}});
        }
        groups[it->second].pairs.push_back(p);
    }
    return groups;
}

DatasetStats compute_stats(std::span<const LabeledPair> pairs)
{
    DatasetStats s;
    s.entries = pairs.size();
    std::unordered_set<std::string> queries;
    std::unordered_set<std::string> products;
    std::size_t relevant = 0;
    std::size_t graded = 0;
    std::size_t partial = 0;
    for (const auto& p : pairs) {
        queries.insert(p.query);
        products.insert(p.doc_id);
        relevant += static_cast<std::size_t>(p.label);
        if (const auto* g = std::get_if<GradedScore>(&p.raw_signal)) {
            ++graded;
            partial += round_half_up(g->value) >= 2 ? 1 : 0;
        }
    }
    s.unique_queries = queries.size();
    s.unique_products = products.size();
    s.relevant_fraction = pairs.empty() ? 0.0 : static_cast<double>(relevant) / static_cast<double>(pairs.size());
    if (graded > 0) {
        s.partially_relevant_fraction = static_cast<double>(partial) / static_cast<double>(graded);
    }
    return s;
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::array<std::string_view, kNumQueryClasses> kClassNames = {
    "BrandCollection", "ColorFinish", "Unit", "Material", "Model", "Typo", "AllOthers",
};
constexpr std::array<std::string_view, kNumQueryClasses> kClassDisplay = {
    "Brand/Collection", "Color/Finish", "Unit", "Material", "Model", "Typo", "All others",
};
}  // namespace

std::string_view query_class_name(QueryClass c) noexcept { return kClassNames[static_cast<std::size_t>(c)]; }

std::optional<QueryClass> parse_query_class(std::string_view name) noexcept
{
    for (std::size_t i = 0; i < kNumQueryClasses; ++i) {
        if (name == kClassNames[i] || name == kClassDisplay[i]) {
            return static_cast<QueryClass>(i);
        }
    }
    return std::nullopt;
}

void QueryClassMap::assign(std::string query, std::vector<QueryClass> classes)
{
    std::set<QueryClass> unique(classes.begin(), classes.end());
    if (unique.size() > 1) {
        unique.erase(QueryClass::AllOthers);
    }
    if (unique.empty()) {
        unique.insert(QueryClass::AllOthers);
    }
    m_map[std::move(query)] = std::vector<QueryClass>(unique.begin(), unique.end());
}

std::vector<QueryClass> QueryClassMap::classes_for(std::string_view query) const
{
    auto it = m_map.find(query);
    if (it == m_map.end()) {
        return {QueryClass::AllOthers};
    }
    return it->second;
}

QueryClassMap read_query_classes(std::istream& in)
{
    QueryClassMap map;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) {
            continue;
        }
        auto cols = split_tabs(strip_cr(line));
        if (cols.size() != 2) {
            throw RecordError(line_no, "expected query \\t classes");
        }
        std::vector<QueryClass> classes;
        std::string_view rest = cols[1];
        while (!rest.empty()) {
            auto comma = rest.find(',');
            auto name = rest.substr(0, comma);
            while (!name.empty() && name.front() == ' ') {
                name.remove_prefix(1);
            }
            while (!name.empty() && name.back() == ' ') {
                name.remove_suffix(1);
            }
            if (!name.empty()) {
                auto c = parse_query_class(name);
                if (!c) {
                    throw RecordError(line_no, "unknown query class '" + std::string(name) + "'");
                }
                classes.push_back(*c);
            }
            rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        }
        map.assign(std::string(cols[0]), std::move(classes));
    }
    return map;
}

}  // namespace prodsearch
