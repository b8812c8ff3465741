// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "prodsearch/lexindex.hpp"
#include "prodsearch/text.hpp"
#include "support/synthetic.hpp"

using namespace prodsearch;

namespace {

FieldedDocument doc(const std::string& id, const std::string& title, const std::string& description,
                    const std::string& brand = "")
{
    FieldedDocument d;
    d.doc_id = id;
    d.instances(Field::Title) = {title};
    d.instances(Field::Description) = {description};
    if (!brand.empty()) {
        d.instances(Field::Brand) = {brand};
    }
    return d;
}

Catalog small_catalog()
{
    Catalog c;
    c.add(doc("p2", "Oak Doors", "solid oak interior door", "acme"));
    c.add(doc("p1", "Steel door", "exterior door with frame", "bolt"));
    c.add(doc("p3", "Paint roller", "nine inch roller cover", "acme"));
    return c;
}

// Textbook BM25 straight from the formula, over a bag of terms.
double reference_bm25(double n, double df, double tf, double len, double avglen, double k1, double b)
{
    const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
    return idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avglen));
}

}  // namespace

TEST_CASE("index statistics")
{
    auto idx = FieldedIndex::build(small_catalog());
    CHECK(idx.num_docs() == 3);
    CHECK(idx.doc_id(0) == "p1");
    CHECK(idx.doc_number("p3") == 2u);
    CHECK(idx.df("door") == 2);
    CHECK(idx.df("acm") == 2);
    CHECK(idx.df("zebra") == 0);
    CHECK(idx.postings(Field::Title, "zebra").empty());
    CHECK(idx.postings(Field::Title, "with").empty());

    auto title = idx.postings(Field::Title, "door");
    REQUIRE(title.size() == 2);
    CHECK(title[0].doc < title[1].doc);
    auto oak = *idx.term_id("oak");
    CHECK(idx.tf(Field::Description, oak, *idx.doc_number("p2")) == 1);
    CHECK(idx.tf(Field::Title, oak, *idx.doc_number("p2")) == 1);
    CHECK(idx.tf(Field::Title, oak, *idx.doc_number("p1")) == 0);

    // "exterior door with frame" loses the stopword
    CHECK(idx.field_length(Field::Description, *idx.doc_number("p1")) == 3);
    double sum = 0.0;
    for (std::uint32_t d = 0; d < 3; ++d) {
        sum += idx.field_length(Field::Title, d);
    }
    CHECK(idx.avg_field_length(Field::Title) == doctest::Approx(sum / 3.0));
    for (std::uint32_t t = 0; t < idx.num_terms(); ++t) {
        CHECK(idx.df(t) <= idx.num_docs());
    }
}

TEST_CASE("single document average length")
{
    Catalog c;
    c.add(doc("a", "alpha beta gamma delta epsilon", "x"));
    auto idx = FieldedIndex::build(c);
    CHECK(idx.avg_field_length(Field::Title) == 5.0);
}

TEST_CASE("empty catalog cannot be indexed")
{
    CHECK_THROWS_AS(FieldedIndex::build(Catalog{}), InputError);
}

TEST_CASE("index binary round trip and corruption")
{
    auto idx = FieldedIndex::build(small_catalog());
    std::stringstream s;
    idx.save(s);
    auto bytes = s.str();
    CHECK(bytes.substr(0, 8) == "PSIDX001");
    std::istringstream in(bytes);
    auto back = FieldedIndex::load(in);
    CHECK(back == idx);

    std::istringstream bad_magic("XXXXXXXX" + bytes.substr(8));
    CHECK_THROWS_AS(FieldedIndex::load(bad_magic), InputError);
    std::istringstream truncated(bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(FieldedIndex::load(truncated), InputError);
}

TEST_CASE("posting dump")
{
    auto idx = FieldedIndex::build(small_catalog());
    std::ostringstream all;
    idx.dump_postings(all, std::string("door"));
    CHECK(all.str() == "title\tdoor\t2\tp1:1 p2:1\ndescription\tdoor\t2\tp1:1 p2:1\n");
    std::ostringstream one;
    idx.dump_postings(one, std::nullopt, Field::Brand);
    CHECK(one.str() == "brand\tacm\t2\tp2:1 p3:1\nbrand\tbolt\t1\tp1:1\n");
}

TEST_CASE("BM25 against the closed form")
{
    Catalog c;
    c.add(doc("a", "oak", "x"));
    c.add(doc("b", "pine", "x"));
    auto idx = FieldedIndex::build(c);
    Bm25Params p;
    std::vector<std::string> q = {"oak"};
    // N=2, df=1, tf=1, len=avglen: IDF = ln 2 and the tf part is 1
    CHECK(bm25_score(idx, q, "a", p) == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(bm25_score(idx, q, "a", p) == doctest::Approx(std::log(2.0)));
    CHECK(bm25_score(idx, q, "b", p) == 0.0);
    CHECK(bm25_score(idx, {}, "a", p) == 0.0);
    CHECK_THROWS_AS(bm25_score(idx, q, "zzz", p), InputError);
    CHECK_THROWS_AS(bm25f_score(idx, q, "zzz", p), InputError);

    auto big = FieldedIndex::build(small_catalog());
    auto d = *big.doc_number("p2");
    const double len = big.doc_length(d);
    // p2 holds "door" and "oak" in both title and description; the repeated
    // query term counts once
    std::vector<std::string> terms = {"door", "oak", "door"};
    CHECK(bm25_score(big, terms, "p2", p) ==
          doctest::Approx(reference_bm25(3, 2, 2, len, big.avg_doc_length(), p.k1, p.b) +
                          reference_bm25(3, 1, 2, len, big.avg_doc_length(), p.k1, p.b)));
}

TEST_CASE("BM25 saturation is monotone in tf")
{
    for (int tf = 1; tf < 6; ++tf) {
        Catalog lo;
        Catalog hi;
        std::string a(" oak");
        std::string text;
        for (int i = 0; i < tf; ++i) {
            text += a;
        }
        lo.add(doc("a", text + " pine", "x"));
        lo.add(doc("b", "elm", "x"));
        hi.add(doc("a", text + text + " pine", "x"));
        hi.add(doc("b", "elm", "x"));
        Bm25Params p;
        p.b = 0.0;  // isolate tf from length changes
        std::vector<std::string> q = {"oak"};
        CHECK(bm25_score(FieldedIndex::build(hi), q, "a", p) >= bm25_score(FieldedIndex::build(lo), q, "a", p));
    }
}

TEST_CASE("BM25F field weights")
{
    auto idx = FieldedIndex::build(small_catalog());
    Bm25Params p;
    std::vector<std::string> q = {"acm"};
    double last = 0.0;
    for (double w : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        p.field_weight[field_index(Field::Brand)] = w;
        double s = bm25f_score(idx, q, "p3", p);
        CHECK(s >= last);
        last = s;
    }
    CHECK(last > 0.0);

    Bm25Params no_title;
    no_title.field_weight[field_index(Field::Title)] = 0.0;
    std::vector<std::string> steel = {"steel"};
    CHECK(bm25f_score(idx, steel, "p1", no_title) == 0.0);
    CHECK(bm25f_score(idx, steel, "p1", Bm25Params{}) > 0.0);
}

TEST_CASE("BM25F with one field and unit weights reduces to BM25")
{
    std::mt19937_64 rng(21);
    auto words = synthetic::words(10, 3);
    for (int corpus = 0; corpus < 30; ++corpus) {
        const auto field = kAllFields[rng() % kNumFields];
        Catalog c;
        for (int d = 0, n = 2 + static_cast<int>(rng() % 5); d < n; ++d) {
            FieldedDocument fd;
            fd.doc_id = "d" + std::to_string(d);
            std::string text;
            for (std::size_t i = 0, m = 1 + rng() % 6; i < m; ++i) {
                text += words[rng() % words.size()] + " ";
            }
            fd.instances(field) = {text};
            c.add(fd);
        }
        auto idx = FieldedIndex::build(c);
        Bm25Params p;
        p.k1 = 0.5 + static_cast<double>(rng() % 100) / 50.0;
        p.b = static_cast<double>(rng() % 101) / 100.0;
        p.field_b.fill(p.b);
        std::vector<std::string> q = {stem(words[rng() % words.size()]), stem(words[rng() % words.size()])};
        for (const auto& d : c) {
            CHECK(std::abs(bm25f_score(idx, q, d.doc_id, p) - bm25_score(idx, q, d.doc_id, p)) <= 1e-9);
        }
    }
}

TEST_CASE("scores stay non-negative even for very common terms")
{
    Catalog c;
    for (int i = 0; i < 5; ++i) {
        c.add(doc("d" + std::to_string(i), "door", "door " + std::string(i, 'x')));
    }
    auto idx = FieldedIndex::build(c);
    std::vector<std::string> q = {"door"};
    for (const auto& d : c) {
        CHECK(bm25_score(idx, q, d.doc_id, Bm25Params{}) >= 0.0);
        CHECK(bm25f_score(idx, q, d.doc_id, Bm25Params{}) >= 0.0);
    }
    CHECK(bm25_idf(5, 5) > 0.0);
}

TEST_CASE("adding a non-matching document only moves corpus statistics")
{
    Catalog c = small_catalog();
    auto before = FieldedIndex::build(c);
    c.add(doc("p9", "hammer", "claw hammer"));
    auto after = FieldedIndex::build(c);
    auto oak = *before.term_id("oak");
    auto oak2 = *after.term_id("oak");
    for (auto f : kAllFields) {
        CHECK(before.tf(f, oak, *before.doc_number("p2")) == after.tf(f, oak2, *after.doc_number("p2")));
        CHECK(before.field_length(f, *before.doc_number("p2")) == after.field_length(f, *after.doc_number("p2")));
    }
    CHECK(after.num_docs() == before.num_docs() + 1);
    // With N and avglen pinned to the old values the score is unchanged.
    Bm25Params p;
    std::vector<std::string> q = {"oak"};
    const double len = before.doc_length(*before.doc_number("p2"));
    CHECK(bm25_score(before, q, "p2", p) ==
          doctest::Approx(reference_bm25(3, 1, 2, len, before.avg_doc_length(), p.k1, p.b)));
    CHECK(bm25_score(after, q, "p2", p) ==
          doctest::Approx(reference_bm25(4, 1, 2, len, after.avg_doc_length(), p.k1, p.b)));
}

TEST_CASE("lexical ranking order and ties")
{
    auto idx = FieldedIndex::build(small_catalog());
    std::vector<std::string> cands = {"p3", "p1", "p2"};
    auto r = rank_lexical(idx, "oak door", cands, Bm25Params{}, LexicalScorer::Bm25);
    REQUIRE(r.size() == 3);
    CHECK(r[0].doc_id == "p2");
    CHECK(r[1].doc_id == "p1");
    CHECK(r[2].doc_id == "p3");
    auto tie = rank_lexical(idx, "zebra", cands, Bm25Params{}, LexicalScorer::Bm25F);
    CHECK(tie[0].doc_id == "p1");
    CHECK(tie[1].doc_id == "p2");
    CHECK(rank_lexical(idx, "oak", {}, Bm25Params{}, LexicalScorer::Bm25).empty());
}

TEST_CASE("parameter validation and persistence")
{
    Bm25Params p;
    p.k1 = 1.5;
    p.field_weight[field_index(Field::Brand)] = 4.0;
    p.field_b[field_index(Field::Title)] = 0.3;
    std::stringstream s;
    p.save(s);
    CHECK(Bm25Params::load(s) == p);

    std::istringstream partial("# tuned\nk1 = 0.9\nw.brand = 2\n");
    auto q = Bm25Params::load(partial);
    CHECK(q.k1 == 0.9);
    CHECK(q.field_weight[field_index(Field::Brand)] == 2.0);

    Bm25Params bad;
    bad.k1 = 0.0;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = Bm25Params{};
    bad.b = 1.5;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = Bm25Params{};
    bad.field_weight.fill(0.0);
    CHECK_THROWS_AS(bad.validate(), InputError);
    std::istringstream unknown("k3 = 1\n");
    CHECK_THROWS_AS(Bm25Params::load(unknown), RecordError);
    std::istringstream nan("k1 = fast\n");
    CHECK_THROWS_AS(Bm25Params::load(nan), RecordError);

    CHECK(parse_lexical_scorer("bm25") == LexicalScorer::Bm25);
    CHECK(parse_lexical_scorer("bm25f") == LexicalScorer::Bm25F);
    CHECK_THROWS_AS(parse_lexical_scorer("tfidf"), InputError);
}

TEST_CASE("tuning finds field weights that separate brand matches")
{
    // Relevance follows the Brand field; the brand word also appears in the
    // title of a non-relevant candidate.
    auto task = synthetic::field_task(5, 0, 16, 0, 2);
    Catalog catalog = task.catalog;
    auto idx = FieldedIndex::build(catalog);
    auto groups = group_by_query(task.validation);
    auto plain = tune_lexical(idx, groups, LexicalScorer::Bm25);
    auto fielded = tune_lexical(idx, groups, LexicalScorer::Bm25F);
    CHECK(plain.evaluations == 12);
    CHECK(fielded.evaluations > 12);
    CHECK(fielded.ndcg5 >= plain.ndcg5);
    CHECK(fielded.ndcg5 == doctest::Approx(1.0));
    CHECK_NOTHROW(fielded.params.validate());
}
