// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "prodsearch/catalog.hpp"
#include "prodsearch/cli.hpp"
#include "support/synthetic.hpp"

using namespace prodsearch;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("prodsearch_cli_" + name))
    {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& f) const { return (path / f).string(); }
};

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result cli(std::vector<std::string> args)
{
    std::ostringstream out;
    std::ostringstream err;
    int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write(const std::string& path, const std::string& text)
{
    std::ofstream(path, std::ios::binary) << text;
}

// Click data and a catalog built from the synthetic brand task.
void write_click_fixture(const TempDir& dir)
{
    auto task = synthetic::field_task(2, 12, 4, 4, 2);
    std::ofstream cat(dir / "products.jsonl");
    write_catalog(cat, task.catalog);
    std::ofstream clicks(dir / "clicks.tsv");
    for (const auto* split : {&task.train, &task.validation, &task.test}) {
        for (const auto& p : *split) {
            clicks << p.query << '\t' << p.doc_id << '\t' << (p.label ? 9 : 1) << '\n';
        }
    }
}

const std::vector<std::string> kTinyModel = {"--d-model", "8",        "--heads",     "2",  "--layers", "1",
                                             "--d-ff",    "8",        "--query-len", "4",  "--field-len", "8",
                                             "--flat-len", "16",      "--head-hidden", "8", "--epochs", "1",
                                             "--batch-size", "8"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b)
{
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

Result ingest(const TempDir& dir)
{
    return cli({"ingest", "--clicks", dir / "clicks.tsv", "--catalog", dir / "products.jsonl", "--out-dir",
                dir.path.string(), "--validation-queries", "4", "--test-queries", "4"});
}

}  // namespace

TEST_CASE("help and argument errors")
{
    auto help = cli({"--help"});
    CHECK(help.code == kExitOk);
    CHECK(help.out.find("ingest") != std::string::npos);
    CHECK(cli({"train", "--help"}).code == kExitOk);
    CHECK(cli({}).code == kExitInput);
    CHECK(cli({"frobnicate"}).code == kExitInput);
    CHECK(cli({"index"}).code == kExitInput);
    CHECK(cli({"train", "--catalog", "x", "--train", "y", "--epochs", "many"}).code == kExitInput);
}

TEST_CASE("empty or mostly malformed input exits with an input error")
{
    TempDir dir("empty");
    write(dir / "clicks.tsv", "");
    write(dir / "products.jsonl", "");
    auto r = cli({"ingest", "--clicks", dir / "clicks.tsv", "--catalog", dir / "products.jsonl", "--out-dir",
                  dir.path.string()});
    CHECK(r.code == kExitInput);
    CHECK_FALSE(r.err.empty());

    write(dir / "clicks.tsv", "oak door\tp1\t7\nbroken line\nred\tp2\tmany\n");
    write(dir / "products.jsonl",
          "{\"doc_id\":\"p1\",\"fields\":{\"title\":[\"Oak door\"],\"description\":[\"solid\"]}}\n");
    r = cli({"ingest", "--clicks", dir / "clicks.tsv", "--catalog", dir / "products.jsonl", "--out-dir",
             dir.path.string()});
    CHECK(r.code == kExitInput);
    CHECK(r.err.find("malformed") != std::string::npos);
    CHECK(cli({"index", "--catalog", dir / "missing.jsonl", "--out-dir", dir.path.string()}).code == kExitInput);
}

TEST_CASE("ingest, index and lexical scoring")
{
    TempDir dir("lexical");
    write_click_fixture(dir);
    auto r = ingest(dir);
    REQUIRE_MESSAGE(r.code == kExitOk, r.err);
    for (const char* f : {"catalog.jsonl", "train.tsv", "validation.tsv", "test.tsv", "stats.tsv"}) {
        CHECK(fs::exists(dir.path / f));
    }
    CHECK(slurp(dir / "stats.tsv").find("train") != std::string::npos);

    REQUIRE(cli({"index", "--catalog", dir / "catalog.jsonl", "--out-dir", dir.path.string()}).code == kExitOk);
    CHECK(fs::exists(dir.path / "index.bin"));

    auto bad = cli({"score-lexical", "--index", dir / "index.bin", "--pairs", dir / "test.tsv", "--scorer", "tfidf",
                    "--out-dir", dir.path.string()});
    CHECK(bad.code == kExitInput);

    auto tuned = cli({"score-lexical", "--index", dir / "index.bin", "--pairs", dir / "test.tsv", "--scorer", "bm25f",
                      "--tune-on", dir / "validation.tsv", "--out-dir", dir.path.string()});
    REQUIRE_MESSAGE(tuned.code == kExitOk, tuned.err);
    CHECK(fs::exists(dir.path / "bm25f_params.txt"));
    auto scores = slurp(dir / "scores_bm25f.tsv");
    CHECK_FALSE(scores.empty());

    auto ev = cli({"evaluate", "--pairs", dir / "test.tsv", "--scores", dir / "scores_bm25f.tsv", "--name", "bm25f",
                   "--out-dir", dir.path.string()});
    REQUIRE_MESSAGE(ev.code == kExitOk, ev.err);
    CHECK(ev.out.find("ndcg@1=") != std::string::npos);
    CHECK(fs::exists(dir.path / "bm25f.tsv"));
    CHECK(fs::exists(dir.path / "bm25f.jsonl"));

    auto dump = cli({"dump-postings", "--index", dir / "index.bin", "--field", "brand"});
    CHECK(dump.code == kExitOk);
    CHECK(dump.out.find("brand\t") == 0);
}

TEST_CASE("oracle scores give a perfect report")
{
    TempDir dir("oracle");
    write(dir / "pairs.tsv", "q1\ta\t1\nq1\tb\t0\nq1\tc\t0\nq2\ta\t0\nq2\td\t1\n");
    write(dir / "scores.tsv", "q1\ta\t1\nq1\tb\t0\nq1\tc\t0\nq2\ta\t0\nq2\td\t1\n");
    auto r = cli({"evaluate", "--pairs", dir / "pairs.tsv", "--scores", dir / "scores.tsv", "--out-dir",
                  dir.path.string()});
    REQUIRE_MESSAGE(r.code == kExitOk, r.err);
    CHECK(r.out.find("ndcg@1=1.000000") != std::string::npos);
    CHECK(r.out.find("map=1.000000") != std::string::npos);
    CHECK(r.out.find("mrr=1.000000") != std::string::npos);
    CHECK(r.out.find("queries=2") != std::string::npos);

    write(dir / "short.tsv", "q1\ta\t1\n");
    CHECK(cli({"evaluate", "--pairs", dir / "pairs.tsv", "--scores", dir / "short.tsv", "--out-dir",
               dir.path.string()})
              .code == kExitInput);
}

TEST_CASE("training reruns are byte-identical and scoring checks its inputs")
{
    TempDir dir("train");
    write_click_fixture(dir);
    REQUIRE(ingest(dir).code == kExitOk);
    auto run = [&](const std::string& sub) {
        fs::create_directories(dir.path / sub);
        return cli(concat({"train", "--catalog", dir / "catalog.jsonl", "--train", dir / "train.tsv",
                           "--validation", dir / "validation.tsv", "--out-dir", (dir.path / sub).string()},
                          kTinyModel));
    };
    auto a = run("a");
    REQUIRE_MESSAGE(a.code == kExitOk, a.err);
    REQUIRE(run("b").code == kExitOk);
    for (const char* f : {"model.ckpt", "model.ckpt.manifest", "vocab.txt", "train_log.tsv", "history.jsonl"}) {
        CAPTURE(f);
        CHECK(fs::exists(dir.path / "a" / f));
        CHECK(slurp((dir.path / "a" / f).string()) == slurp((dir.path / "b" / f).string()));
    }

    auto s = cli({"score", "--model", dir / "a/model.ckpt", "--vocab", dir / "a/vocab.txt", "--catalog",
                  dir / "catalog.jsonl", "--pairs", dir / "test.tsv", "--out-dir", dir.path.string()});
    REQUIRE_MESSAGE(s.code == kExitOk, s.err);
    CHECK_FALSE(slurp(dir / "scores.tsv").empty());

    CHECK(cli({"score", "--model", dir / "nope.ckpt", "--vocab", dir / "a/vocab.txt", "--catalog",
               dir / "catalog.jsonl", "--pairs", dir / "test.tsv", "--out-dir", dir.path.string()})
              .code == kExitInput);
    write(dir / "short_vocab.txt", "oak\n");
    CHECK(cli({"score", "--model", dir / "a/model.ckpt", "--vocab", dir / "short_vocab.txt", "--catalog",
               dir / "catalog.jsonl", "--pairs", dir / "test.tsv", "--out-dir", dir.path.string()})
              .code == kExitInput);
}

TEST_CASE("config file values sit between flags and defaults")
{
    TempDir dir("config");
    write_click_fixture(dir);
    REQUIRE(ingest(dir).code == kExitOk);
    auto model = kTinyModel;
    model.erase(model.begin() + 16, model.begin() + 18);  // drop --epochs
    write(dir / "run.conf", "# training\nepochs = 2\nout-dir = " + (dir.path / "from_conf").string() + "\n");
    auto base = std::vector<std::string>{"train", "--config", dir / "run.conf", "--catalog", dir / "catalog.jsonl",
                                         "--train", dir / "train.tsv"};
    auto r = cli(concat(base, model));
    REQUIRE_MESSAGE(r.code == kExitOk, r.err);
    auto history = slurp(dir / "from_conf/history.jsonl");
    CHECK(std::count(history.begin(), history.end(), '\n') == 2);

    auto flagged = concat(concat(base, model), {"--epochs", "1", "--out-dir", dir / "from_flag"});
    REQUIRE(cli(flagged).code == kExitOk);
    history = slurp(dir / "from_flag/history.jsonl");
    CHECK(std::count(history.begin(), history.end(), '\n') == 1);

    write(dir / "bad.conf", "bogus = 1\n");
    CHECK(cli({"index", "--config", dir / "bad.conf", "--catalog", dir / "catalog.jsonl"}).code == kExitInput);
    CHECK(cli({"index", "--config", dir / "absent.conf", "--catalog", dir / "catalog.jsonl"}).code == kExitInput);
}

TEST_CASE("ablation writes both variants and the comparison table")
{
    TempDir dir("ablate");
    write_click_fixture(dir);
    REQUIRE(ingest(dir).code == kExitOk);
    auto r = cli(concat({"ablate", "--catalog", dir / "catalog.jsonl", "--train", dir / "train.tsv", "--validation",
                         dir / "validation.tsv", "--test", dir / "test.tsv", "--dataset", "synthetic", "--out-dir",
                         dir.path.string()},
                        kTinyModel));
    REQUIRE_MESSAGE(r.code == kExitOk, r.err);
    for (const char* f : {"report_fielded.tsv", "report_flat.tsv", "ablation.tsv", "ablation.txt",
                          "train_log_fielded.tsv", "history_flat.jsonl"}) {
        CAPTURE(f);
        CHECK(fs::exists(dir.path / f));
    }
    CHECK(slurp(dir / "ablation.txt").find("synthetic") != std::string::npos);
}
