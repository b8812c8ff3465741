// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "prodsearch/psr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <istream>
#include <map>

namespace prodsearch {

bool CsvReader::next(std::vector<std::string>& row)
{
    row.clear();
    int c = m_in.get();
    if (c == std::char_traits<char>::eof()) {
        return false;
    }
    m_row_line = m_line;
    std::string cell;
    bool quoted = false;
    while (true) {
        if (c == std::char_traits<char>::eof()) {
            row.push_back(std::move(cell));
            return true;
        }
        char ch = static_cast<char>(c);
        if (quoted) {
            if (ch == '"') {
                if (m_in.peek() == '"') {
                    cell += '"';
                    m_in.get();
                } else {
                    quoted = false;
                }
            } else {
                if (ch == '\n') {
                    ++m_line;
                }
                cell += ch;
            }
        } else if (ch == '"' && cell.empty()) {
            quoted = true;
        } else if (ch == ',') {
            row.push_back(std::move(cell));
            cell.clear();
        } else if (ch == '\n') {
            ++m_line;
            row.push_back(std::move(cell));
            return true;
        } else if (ch != '\r') {
            cell += ch;
        }
        c = m_in.get();
    }
}

namespace {

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::map<std::string, std::size_t> header_index(const std::vector<std::string>& header)
{
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < header.size(); ++i) {
        auto name = lower(header[i]);
        // A UTF-8 byte order mark may precede the first column name.
        if (i == 0 && name.starts_with("\xef\xbb\xbf")) {
            name.erase(0, 3);
        }
        idx[name] = i;
    }
    return idx;
}

std::size_t require_column(const std::map<std::string, std::size_t>& idx, const std::string& name)
{
    auto it = idx.find(name);
    if (it == idx.end()) {
        throw InputError("CSV is missing column '" + name + "'");
    }
    return it->second;
}

}  // namespace

Field attribute_field(std::string_view attribute_name)
{
    auto name = lower(attribute_name);
    if (name.starts_with("mfg brand name") || name.starts_with("brand")) {
        return Field::Brand;
    }
    if (name.starts_with("bullet")) {
        return Field::Description;
    }
    static constexpr std::array<std::string_view, 10> kUnits = {
        "(in.)", "(ft.)", "(lb.)", "(lbs.)", "(mm)", "(cm)", "(sq. ft.)", "(gal.)", "(oz.)", "(watts)",
    };
    for (auto u : kUnits) {
        if (name.find(u) != std::string::npos) {
            return Field::Numeric;
        }
    }
    static constexpr std::array<std::string_view, 5> kDims = {"width", "height", "depth", "length", "weight"};
    for (auto d : kDims) {
        if (name.starts_with(d)) {
            return Field::Numeric;
        }
    }
    return Field::Metadata;
}

PsrDataset read_psr(const PsrInputs& inputs)
{
    if (inputs.train == nullptr) {
        throw InputError("PSR ingestion requires the train CSV");
    }
    PsrDataset out;
    std::map<std::string, FieldedDocument> docs;

    CsvReader train(*inputs.train);
    std::vector<std::string> row;
    if (!train.next(row)) {
        throw InputError("PSR train CSV is empty");
    }
    auto cols = header_index(row);
    auto c_uid = require_column(cols, "product_uid");
    auto c_query = require_column(cols, "search_term");
    auto c_rel = require_column(cols, "relevance");
    std::optional<std::size_t> c_title;
    if (auto it = cols.find("product_title"); it != cols.end()) {
        c_title = it->second;
    }

    while (train.next(row)) {
        ++out.rows;
        auto width = std::max({c_uid, c_query, c_rel, c_title.value_or(0)}) + 1;
        if (row.size() < width) {
            out.errors.emplace_back(train.line(), "too few columns");
            continue;
        }
        double graded = 0.0;
        try {
            std::size_t used = 0;
            graded = std::stod(row[c_rel], &used);
            if (used != row[c_rel].size()) {
                throw InputError("trailing characters");
            }
            auto label = binarize_psr(graded, inputs.threshold);
            auto& doc = docs[row[c_uid]];
            if (doc.doc_id.empty()) {
                doc.doc_id = row[c_uid];
            }
            if (c_title && doc.instances(Field::Title).empty() && !row[*c_title].empty()) {
                doc.instances(Field::Title).push_back(row[*c_title]);
            }
            out.pairs.push_back({row[c_query], row[c_uid], label, GradedScore{graded}});
        } catch (const std::exception&) {
            out.errors.emplace_back(train.line(), "relevance '" + row[c_rel] + "' is not a score in [1, 3]");
        }
    }

    if (inputs.descriptions != nullptr) {
        CsvReader reader(*inputs.descriptions);
        if (reader.next(row)) {
            auto h = header_index(row);
            auto uid = require_column(h, "product_uid");
            auto desc = require_column(h, "product_description");
            while (reader.next(row)) {
                if (row.size() <= std::max(uid, desc)) {
                    continue;
                }
                auto it = docs.find(row[uid]);
                if (it != docs.end() && !row[desc].empty()) {
                    it->second.instances(Field::Description).push_back(row[desc]);
                }
            }
        }
    }

    if (inputs.attributes != nullptr) {
        CsvReader reader(*inputs.attributes);
        if (reader.next(row)) {
            auto h = header_index(row);
            auto uid = require_column(h, "product_uid");
            auto name = require_column(h, "name");
            auto value = require_column(h, "value");
            while (reader.next(row)) {
                if (row.size() <= std::max({uid, name, value}) || row[value].empty()) {
                    continue;
                }
                auto it = docs.find(row[uid]);
                if (it != docs.end()) {
                    it->second.instances(attribute_field(row[name])).push_back(row[value]);
                }
            }
        }
    }

    for (auto& [id, doc] : docs) {
        out.catalog.add(std::move(doc));
    }
    return out;
}

}  // namespace prodsearch
