// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "prodsearch/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "prodsearch/catalog.hpp"
#include "prodsearch/checkpoint.hpp"
#include "prodsearch/error.hpp"
#include "prodsearch/eval.hpp"
#include "prodsearch/lexindex.hpp"
#include "prodsearch/model.hpp"
#include "prodsearch/psr.hpp"
#include "prodsearch/text.hpp"
#include "prodsearch/train.hpp"

namespace prodsearch {
namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kDefaultSeed = 20200725;
constexpr double kMaxMalformedFraction = 0.01;

struct Common {
    std::uint64_t seed = kDefaultSeed;
    std::size_t threads = 1;
    std::string out_dir = ".";
    std::string config;
};

bool flag_given(std::span<const std::string> args, const std::string& flag)
{
    return std::any_of(args.begin(), args.end(),
                       [&](const std::string& a) { return a == flag || a.starts_with(flag + "="); });
}

/// Appends `--key value` for every config entry whose flag is not already on
/// the command line, so explicit flags win over the file.
std::vector<std::string> expand_config(std::vector<std::string> args)
{
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
        } else if (args[i].starts_with("--config=")) {
            path = args[i].substr(9);
        }
    }
    if (path.empty()) {
        return args;
    }
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open config file " + path);
    }
    const std::vector<std::string> given = args;
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](const std::string& s) {
        auto a = s.find_first_not_of(" \t\r");
        auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw RecordError(line_no, "config entries are key = value");
        }
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        if (key.empty() || key == "config") {
            throw RecordError(line_no, "invalid config key '" + key + "'");
        }
        if (!flag_given(given, "--" + key)) {
            args.push_back("--" + key);
            args.push_back(value);
        }
    }
    return args;
}

void add_common(CLI::App* sub, Common& c)
{
    sub->add_option("--config", c.config, "Flat key = value file; keys are long flag names");
    sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    sub->add_option("--threads", c.threads, "Worker threads (1 = bitwise reproducible)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--out-dir", c.out_dir, "Output directory")->capture_default_str();
}

std::ifstream open_in(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open " + path);
    }
    return in;
}

fs::path output_dir(const Common& c)
{
    fs::path dir(c.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw InputError("cannot create output directory " + c.out_dir);
    }
    return dir;
}

std::ofstream open_out(const fs::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InputError("cannot write " + path.string());
    }
    return out;
}

std::string fixed6(double v)
{
    std::ostringstream s;
    s << std::fixed << std::setprecision(6) << v;
    return s.str();
}

Catalog load_catalog(const std::string& path)
{
    auto in = open_in(path);
    return read_catalog(in);
}

std::vector<LabeledPair> load_pairs(const std::string& path)
{
    auto in = open_in(path);
    return read_pairs(in);
}

void check_malformed(std::size_t errors, std::size_t records, std::ostream& err, const std::string& what)
{
    if (records == 0) {
        throw InputError(what + " holds no records");
    }
    if (errors == 0) {
        return;
    }
    const double frac = static_cast<double>(errors) / static_cast<double>(records);
    err << "warning: " << errors << " of " << records << " " << what << " records are malformed\n";
    if (frac >= kMaxMalformedFraction) {
        throw InputError("too many malformed records in " + what + " (" + fixed6(100.0 * frac) + "%)");
    }
}

void write_stats(std::ostream& out, const DatasetSplits& splits)
{
    out << "split\tentries\tunique_queries\tunique_products\trelevant_fraction\tpartially_relevant_fraction\n";
    auto row = [&](const std::string& name, std::span<const LabeledPair> pairs) {
        auto s = compute_stats(pairs);
        out << name << '\t' << s.entries << '\t' << s.unique_queries << '\t' << s.unique_products << '\t'
            << fixed6(s.relevant_fraction) << '\t'
            << (s.partially_relevant_fraction ? fixed6(*s.partially_relevant_fraction) : std::string("NA")) << '\n';
    };
    std::vector<LabeledPair> all = splits.train;
    all.insert(all.end(), splits.validation.begin(), splits.validation.end());
    all.insert(all.end(), splits.test.begin(), splits.test.end());
    row("all", all);
    row("train", splits.train);
    row("validation", splits.validation);
    row("test", splits.test);
}

/// Keeps pairs whose document exists and satisfies the field requirements.
std::vector<LabeledPair> keep_indexable(std::vector<LabeledPair> pairs, const Catalog& catalog, std::ostream& err)
{
    std::size_t dropped = 0;
    std::erase_if(pairs, [&](const LabeledPair& p) {
        const auto* doc = catalog.find(p.doc_id);
        bool bad = doc == nullptr || !doc->is_valid();
        dropped += bad ? 1 : 0;
        return bad;
    });
    if (dropped > 0) {
        err << "warning: dropped " << dropped << " pairs with unknown or incomplete products\n";
    }
    return pairs;
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
    std::string clicks;
    std::string catalog;
    std::int64_t threshold = 5;
    std::size_t top_k = 10;
    std::string psr_train;
    std::string psr_descriptions;
    std::string psr_attributes;
    double psr_threshold = 2.5;
    double validation_fraction = 0.1;
    double test_fraction = 0.1;
    std::optional<std::size_t> validation_queries;
    std::optional<std::size_t> test_queries;
};

void cmd_ingest(const IngestArgs& a, const Common& c, std::ostream& out, std::ostream& err)
{
    const bool clicks = !a.clicks.empty();
    const bool psr = !a.psr_train.empty();
    if (clicks == psr) {
        throw InputError("ingest needs exactly one of --clicks or --psr-train");
    }
    SplitConfig split;
    split.validation_fraction = a.validation_fraction;
    split.test_fraction = a.test_fraction;
    split.validation_queries = a.validation_queries;
    split.test_queries = a.test_queries;
    split.seed = c.seed;

    Catalog catalog;
    DatasetSplits splits;
    if (clicks) {
        if (a.catalog.empty()) {
            throw InputError("--clicks requires --catalog");
        }
        catalog = load_catalog(a.catalog);
        auto in = open_in(a.clicks);
        auto parsed = parse_click_triples(in);
        check_malformed(parsed.errors.size(), parsed.triples.size() + parsed.errors.size(), err, "click");
        auto labeled = label_click_triples(parsed.triples, a.threshold);
        labeled = keep_indexable(std::move(labeled), catalog, err);
        splits = split_by_query(filter_queries(labeled), split);

        std::set<std::string> train_queries;
        for (const auto& p : splits.train) {
            train_queries.insert(p.query);
        }
        std::vector<ClickTriple> train_triples;
        for (const auto& t : parsed.triples) {
            if (train_queries.contains(t.query)) {
                train_triples.push_back(t);
            }
        }
        auto terms = build_search_terms(train_triples, a.top_k);
        for (auto& doc : catalog.documents()) {
            auto it = terms.find(doc.doc_id);
            doc.instances(Field::SearchTerms) = it == terms.end() ? std::vector<std::string>{} : it->second;
        }
    } else {
        auto train_in = open_in(a.psr_train);
        std::optional<std::ifstream> desc_in;
        std::optional<std::ifstream> attr_in;
        PsrInputs inputs;
        inputs.train = &train_in;
        inputs.threshold = a.psr_threshold;
        if (!a.psr_descriptions.empty()) {
            desc_in.emplace(open_in(a.psr_descriptions));
            inputs.descriptions = &*desc_in;
        }
        if (!a.psr_attributes.empty()) {
            attr_in.emplace(open_in(a.psr_attributes));
            inputs.attributes = &*attr_in;
        }
        auto data = read_psr(inputs);
        check_malformed(data.errors.size(), data.rows, err, "PSR");
        catalog = std::move(data.catalog);
        auto pairs = keep_indexable(std::move(data.pairs), catalog, err);
        splits = split_by_query(filter_queries(pairs), split);
    }
    if (splits.train.empty() && splits.validation.empty() && splits.test.empty()) {
        throw InputError("no labeled pair survived filtering");
    }

    auto dir = output_dir(c);
    {
        auto f = open_out(dir / "catalog.jsonl");
        write_catalog(f, catalog);
    }
    for (auto [name, pairs] : {std::pair{"train.tsv", &splits.train}, std::pair{"validation.tsv", &splits.validation},
                               std::pair{"test.tsv", &splits.test}}) {
        auto f = open_out(dir / name);
        write_pairs(f, *pairs);
    }
    auto f = open_out(dir / "stats.tsv");
    write_stats(f, splits);
    write_stats(out, splits);
}

// ---------------------------------------------------------------------------
// lexical

struct IndexArgs {
    std::string catalog;
    std::string index;
};

void cmd_index(const IndexArgs& a, const Common& c, std::ostream& out)
{
    auto catalog = load_catalog(a.catalog);
    auto index = FieldedIndex::build(catalog);
    auto path = a.index.empty() ? output_dir(c) / "index.bin" : fs::path(a.index);
    auto f = open_out(path);
    index.save(f);
    out << "indexed " << index.num_docs() << " documents, " << index.num_terms() << " terms\n";
}

FieldedIndex load_index(const std::string& path)
{
    auto in = open_in(path);
    return FieldedIndex::load(in);
}

struct LexicalArgs {
    std::string index;
    std::string pairs;
    std::string scorer = "bm25";
    std::string params;
    std::string tune_on;
    std::string output;
};

void write_scores(std::ostream& out, std::span<const QueryGroup> groups,
                  const std::function<std::vector<RankedDoc>(const QueryGroup&)>& rank)
{
    for (const auto& g : groups) {
        for (const auto& r : rank(g)) {
            out << g.query << '\t' << r.doc_id << '\t' << fixed6(r.score) << '\n';
        }
    }
}

void cmd_score_lexical(const LexicalArgs& a, const Common& c, std::ostream& out)
{
    const auto scorer = parse_lexical_scorer(a.scorer);
    auto index = load_index(a.index);
    Bm25Params params;
    if (!a.params.empty()) {
        auto in = open_in(a.params);
        params = Bm25Params::load(in);
    }
    auto dir = output_dir(c);
    if (!a.tune_on.empty()) {
        auto validation = load_pairs(a.tune_on);
        auto groups = group_by_query(validation);
        auto tuned = tune_lexical(index, groups, scorer);
        params = tuned.params;
        auto f = open_out(dir / (a.scorer + "_params.txt"));
        params.save(f);
        out << "tuned " << a.scorer << ": validation ndcg@5 " << fixed6(tuned.ndcg5) << " over " << tuned.evaluations
            << " settings\n";
    }
    params.validate();
    auto pairs = load_pairs(a.pairs);
    auto groups = group_by_query(pairs);
    auto path = a.output.empty() ? dir / ("scores_" + a.scorer + ".tsv") : fs::path(a.output);
    auto f = open_out(path);
    write_scores(f, groups, [&](const QueryGroup& g) {
        std::vector<std::string> cands;
        for (const auto& p : g.pairs) {
            cands.push_back(p.doc_id);
        }
        return rank_lexical(index, g.query, cands, params, scorer);
    });
}

struct DumpArgs {
    std::string index;
    std::string term;
    std::string field;
};

void cmd_dump_postings(const DumpArgs& a, std::ostream& out)
{
    auto index = load_index(a.index);
    std::optional<Field> field;
    if (!a.field.empty()) {
        field = parse_field_name(a.field);
        if (!field) {
            throw InputError("unknown field '" + a.field + "'");
        }
    }
    std::optional<std::string> term;
    if (!a.term.empty()) {
        // Terms are stored after analysis, so look up the analyzed form.
        auto analyzed = analyze_lexical(a.term);
        term = analyzed.empty() ? a.term : analyzed.front();
    }
    index.dump_postings(out, term, field);
}

// ---------------------------------------------------------------------------
// neural

struct ModelArgs {
    ModelConfig model;
    TrainConfig train;
    std::string variant = "fielded";
    std::size_t min_freq = 1;
};

void add_model_options(CLI::App* sub, ModelArgs& m)
{
    auto& e = m.model.encoder;
    sub->add_option("--d-model", e.d_model)->capture_default_str();
    sub->add_option("--layers", e.n_layers)->capture_default_str();
    sub->add_option("--heads", e.n_heads)->capture_default_str();
    sub->add_option("--d-ff", e.d_ff)->capture_default_str();
    sub->add_option("--query-len", e.query_len)->capture_default_str();
    sub->add_option("--field-len", e.field_len)->capture_default_str();
    sub->add_option("--flat-len", e.flat_len)->capture_default_str();
    sub->add_option("--dropout", e.dropout, "Encoder dropout")->capture_default_str();
    sub->add_option("--head-hidden", m.model.head_hidden)->capture_default_str();
    sub->add_option("--head-dropout", m.model.head_dropout)->capture_default_str();
    sub->add_option("--min-freq", m.min_freq, "Minimum token count for the vocabulary")->capture_default_str();
    sub->add_option("--epochs", m.train.epochs)->capture_default_str();
    sub->add_option("--batch-size", m.train.batch_size)->capture_default_str();
    sub->add_option("--lr", m.train.base_lr, "Peak learning rate")->capture_default_str();
    sub->add_option("--warmup", m.train.warmup_fraction, "Warmup fraction of all steps")->capture_default_str();
    sub->add_option("--weight-decay", m.train.weight_decay)->capture_default_str();
}

struct DataArgs {
    std::string catalog;
    std::string train;
    std::string validation;
    std::string test;
};

struct TrainedModel {
    Vocab vocab;
    FitResult fit;
};

TrainedModel train_variant(const Catalog& catalog, std::span<const LabeledPair> train,
                           std::span<const LabeledPair> validation, ModelConfig cfg, TrainConfig tc,
                           std::size_t min_freq, const Common& c, std::ostream* step_log)
{
    tc.seed = c.seed;
    tc.threads = c.threads;
    auto vocab = build_training_vocab(catalog, train, min_freq);
    cfg.encoder.vocab_size = vocab.size();
    cfg.validate();
    auto model = Model<float>::create(cfg, c.seed);
    auto result = fit(std::move(model), TrainData{catalog, vocab, train, validation}, tc, step_log);
    return {std::move(vocab), std::move(result)};
}

MetricsReport evaluate_model(const Model<float>& model, const Vocab& vocab, const Catalog& catalog,
                             std::span<const LabeledPair> pairs)
{
    CachedScorer<float> scorer(model, vocab, catalog);
    auto groups = group_by_query(pairs);
    return evaluate_run([&](const std::string& q, const std::string& d) { return double(scorer(q, d)); }, groups);
}

void write_report_files(const fs::path& dir, const std::string& name, const MetricsReport& report)
{
    auto tsv = open_out(dir / (name + ".tsv"));
    write_report_tsv(tsv, report);
    auto jsonl = open_out(dir / (name + ".jsonl"));
    write_report_jsonl(jsonl, report);
}

void print_summary(std::ostream& out, const std::string& label, const MetricsReport& r)
{
    out << label << ":";
    auto names = r.metric_names();
    for (std::size_t i = 0; i < r.cutoffs.size(); ++i) {
        out << ' ' << names[i] << '=' << fixed6(r.mean.ndcg[i]);
    }
    out << " map=" << fixed6(r.mean.map) << " mrr=" << fixed6(r.mean.mrr) << " queries=" << r.mean.queries << '\n';
}

void cmd_train(const DataArgs& d, ModelArgs m, const Common& c, std::ostream& out, std::ostream& err)
{
    m.model.variant = parse_variant(m.variant);
    auto catalog = load_catalog(d.catalog);
    auto train = keep_indexable(load_pairs(d.train), catalog, err);
    std::vector<LabeledPair> validation;
    if (!d.validation.empty()) {
        validation = keep_indexable(load_pairs(d.validation), catalog, err);
    }
    auto dir = output_dir(c);
    auto log = open_out(dir / "train_log.tsv");
    auto [vocab, result] = train_variant(catalog, train, validation, m.model, m.train, m.min_freq, c, &log);
    for (const auto& w : result.history.warnings) {
        err << "warning: " << w << '\n';
    }
    save_checkpoint(dir / "model.ckpt", result.model);
    {
        auto f = open_out(dir / "vocab.txt");
        vocab.save(f);
    }
    {
        auto f = open_out(dir / "history.jsonl");
        write_history_jsonl(f, result.history);
    }
    if (!validation.empty()) {
        auto report = evaluate_model(result.model, vocab, catalog, validation);
        write_report_files(dir, "validation_report", report);
        print_summary(out, "validation", report);
    }
    out << "best epoch " << result.history.best_epoch << " of " << result.history.epochs.size() << '\n';
}

struct ScoreArgs {
    std::string model;
    std::string vocab;
    std::string catalog;
    std::string pairs;
    std::string output;
};

void cmd_score(const ScoreArgs& a, const Common& c)
{
    auto model = load_checkpoint(a.model);
    auto vocab_in = open_in(a.vocab);
    auto vocab = Vocab::load(vocab_in);
    if (vocab.size() != model.config().encoder.vocab_size) {
        throw InputError("vocabulary size does not match the checkpoint");
    }
    auto catalog = load_catalog(a.catalog);
    auto pairs = load_pairs(a.pairs);
    auto groups = group_by_query(pairs);
    CachedScorer<float> scorer(model, vocab, catalog);
    auto path = a.output.empty() ? output_dir(c) / "scores.tsv" : fs::path(a.output);
    auto f = open_out(path);
    write_scores(f, groups, [&](const QueryGroup& g) {
        std::vector<RankedDoc> ranked;
        for (const auto& p : g.pairs) {
            ranked.push_back({p.doc_id, scorer(p.query, p.doc_id)});
        }
        std::stable_sort(ranked.begin(), ranked.end(), [](const RankedDoc& x, const RankedDoc& y) {
            return x.score != y.score ? x.score > y.score : x.doc_id < y.doc_id;
        });
        return ranked;
    });
}

using ScoreTable = std::map<std::pair<std::string, std::string>, double>;

ScoreTable load_scores(const std::string& path)
{
    auto in = open_in(path);
    ScoreTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto t1 = line.find('\t');
        auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string::npos) {
            throw RecordError(line_no, "expected query\\tdoc_id\\tscore");
        }
        try {
            std::size_t used = 0;
            auto text = line.substr(t2 + 1);
            double v = std::stod(text, &used);
            if (used != text.size()) {
                throw InputError("trailing characters");
            }
            table[{line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1)}] = v;
        } catch (const std::exception&) {
            throw RecordError(line_no, "score is not a number");
        }
    }
    return table;
}

MetricsReport evaluate_table(const ScoreTable& table, std::span<const QueryGroup> groups)
{
    return evaluate_run(
        [&](const std::string& q, const std::string& d) {
            auto it = table.find({q, d});
            if (it == table.end()) {
                throw InputError("no score for (" + q + ", " + d + ")");
            }
            return it->second;
        },
        groups);
}

struct EvaluateArgs {
    std::string pairs;
    std::string scores;
    std::string baseline_scores;
    std::string classes;
    std::string name = "report";
    std::string baseline_name = "Baseline";
    std::string ours_name = "Ours";
};

void cmd_evaluate(const EvaluateArgs& a, const Common& c, std::ostream& out, std::ostream& err)
{
    auto pairs = load_pairs(a.pairs);
    auto groups = group_by_query(pairs);
    auto report = evaluate_table(load_scores(a.scores), groups);
    for (const auto& w : report.warnings) {
        err << "warning: " << w << '\n';
    }
    auto dir = output_dir(c);
    write_report_files(dir, a.name, report);
    print_summary(out, a.name, report);
    if (a.classes.empty()) {
        return;
    }
    auto in = open_in(a.classes);
    auto classes = read_query_classes(in);
    std::vector<std::string> warnings;
    auto rows = class_breakdown(report, classes, &warnings);
    for (const auto& w : warnings) {
        err << "warning: " << w << '\n';
    }
    auto f = open_out(dir / (a.name + "_classes.tsv"));
    write_class_table(f, rows, report);
    if (!a.baseline_scores.empty()) {
        auto baseline = evaluate_table(load_scores(a.baseline_scores), groups);
        auto base_rows = class_breakdown(baseline, classes);
        auto cmp = open_out(dir / (a.name + "_class_comparison.txt"));
        write_class_comparison(cmp, base_rows, rows, report, a.baseline_name, a.ours_name);
    }
}

void cmd_ablate(const DataArgs& d, const ModelArgs& m, const Common& c, const std::string& dataset,
                std::ostream& out, std::ostream& err)
{
    auto catalog = load_catalog(d.catalog);
    auto train = keep_indexable(load_pairs(d.train), catalog, err);
    std::vector<LabeledPair> validation;
    if (!d.validation.empty()) {
        validation = keep_indexable(load_pairs(d.validation), catalog, err);
    }
    auto test = keep_indexable(load_pairs(d.test), catalog, err);
    auto dir = output_dir(c);
    std::map<Variant, MetricsReport> reports;
    for (auto v : {Variant::Fielded, Variant::Flat}) {
        auto cfg = m.model;
        cfg.variant = v;
        const std::string name(variant_name(v));
        auto log = open_out(dir / ("train_log_" + name + ".tsv"));
        auto trained = train_variant(catalog, train, validation, cfg, m.train, m.min_freq, c, &log);
        {
            auto f = open_out(dir / ("history_" + name + ".jsonl"));
            write_history_jsonl(f, trained.fit.history);
        }
        auto report = evaluate_model(trained.fit.model, trained.vocab, catalog, test);
        write_report_files(dir, "report_" + name, report);
        print_summary(out, name, report);
        reports.emplace(v, std::move(report));
    }
    std::vector<AblationResult> results{
        run_ablation(std::move(reports.at(Variant::Fielded)), std::move(reports.at(Variant::Flat)), dataset)};
    {
        auto f = open_out(dir / "ablation.tsv");
        write_ablation_tsv(f, results);
    }
    auto f = open_out(dir / "ablation.txt");
    write_ablation_table(f, results);
    write_ablation_table(out, results);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Fielded product search relevance toolkit", "prodsearch"};
    app.require_subcommand(1);

    Common common;
    IngestArgs ingest;
    auto* s_ingest = app.add_subcommand("ingest", "Build the catalog and query-disjoint splits");
    add_common(s_ingest, common);
    s_ingest->add_option("--clicks", ingest.clicks, "Click triples: query<TAB>doc_id<TAB>clicks");
    s_ingest->add_option("--catalog", ingest.catalog, "Product catalog (JSONL) for click data");
    s_ingest->add_option("--threshold", ingest.threshold, "Clicks needed for a relevant label")->capture_default_str();
    s_ingest->add_option("--search-terms-top-k", ingest.top_k)->capture_default_str();
    s_ingest->add_option("--psr-train", ingest.psr_train, "PSR train.csv");
    s_ingest->add_option("--psr-descriptions", ingest.psr_descriptions, "PSR product_descriptions.csv");
    s_ingest->add_option("--psr-attributes", ingest.psr_attributes, "PSR attributes.csv");
    s_ingest->add_option("--psr-threshold", ingest.psr_threshold)->capture_default_str();
    s_ingest->add_option("--validation-fraction", ingest.validation_fraction)->capture_default_str();
    s_ingest->add_option("--test-fraction", ingest.test_fraction)->capture_default_str();
    s_ingest->add_option("--validation-queries", ingest.validation_queries, "Absolute count; overrides fraction");
    s_ingest->add_option("--test-queries", ingest.test_queries, "Absolute count; overrides fraction");

    IndexArgs index;
    auto* s_index = app.add_subcommand("index", "Build the fielded inverted index");
    add_common(s_index, common);
    s_index->add_option("--catalog", index.catalog)->required();
    s_index->add_option("--index", index.index, "Output path (default <out-dir>/index.bin)");

    LexicalArgs lexical;
    auto* s_lex = app.add_subcommand("score-lexical", "Score candidate pairs with BM25 or BM25F");
    add_common(s_lex, common);
    s_lex->add_option("--index", lexical.index)->required();
    s_lex->add_option("--pairs", lexical.pairs, "Candidate pairs to score")->required();
    s_lex->add_option("--scorer", lexical.scorer, "bm25 or bm25f")->capture_default_str();
    s_lex->add_option("--params", lexical.params, "Parameter file (key = value)");
    s_lex->add_option("--tune-on", lexical.tune_on, "Validation pairs for parameter search");
    s_lex->add_option("--output", lexical.output, "Output path (default <out-dir>/scores_<scorer>.tsv)");

    DataArgs data;
    ModelArgs model;
    auto* s_train = app.add_subcommand("train", "Train the neural relevance model");
    add_common(s_train, common);
    s_train->add_option("--catalog", data.catalog)->required();
    s_train->add_option("--train", data.train)->required();
    s_train->add_option("--validation", data.validation);
    s_train->add_option("--variant", model.variant, "fielded or flat")->capture_default_str();
    add_model_options(s_train, model);

    ScoreArgs score;
    auto* s_score = app.add_subcommand("score", "Score candidate pairs with a trained model");
    add_common(s_score, common);
    s_score->add_option("--model", score.model)->required();
    s_score->add_option("--vocab", score.vocab)->required();
    s_score->add_option("--catalog", score.catalog)->required();
    s_score->add_option("--pairs", score.pairs)->required();
    s_score->add_option("--output", score.output, "Output path (default <out-dir>/scores.tsv)");

    EvaluateArgs evaluate;
    auto* s_eval = app.add_subcommand("evaluate", "NDCG@1/5, MAP and MRR of a score file");
    add_common(s_eval, common);
    s_eval->add_option("--pairs", evaluate.pairs, "Labeled pairs")->required();
    s_eval->add_option("--scores", evaluate.scores, "query<TAB>doc_id<TAB>score")->required();
    s_eval->add_option("--classes", evaluate.classes, "query<TAB>Class,Class side file");
    s_eval->add_option("--baseline-scores", evaluate.baseline_scores, "Second run for a per-class comparison");
    s_eval->add_option("--name", evaluate.name, "Report file stem")->capture_default_str();
    s_eval->add_option("--baseline-name", evaluate.baseline_name)->capture_default_str();
    s_eval->add_option("--ours-name", evaluate.ours_name)->capture_default_str();

    DataArgs ablate_data;
    ModelArgs ablate_model;
    std::string dataset = "test";
    auto* s_ablate = app.add_subcommand("ablate", "Train fielded and flat variants and compare them");
    add_common(s_ablate, common);
    s_ablate->add_option("--catalog", ablate_data.catalog)->required();
    s_ablate->add_option("--train", ablate_data.train)->required();
    s_ablate->add_option("--validation", ablate_data.validation);
    s_ablate->add_option("--test", ablate_data.test)->required();
    s_ablate->add_option("--dataset", dataset, "Label for the table")->capture_default_str();
    add_model_options(s_ablate, ablate_model);

    DumpArgs dump;
    auto* s_dump = app.add_subcommand("dump-postings", "Print posting lists");
    add_common(s_dump, common);
    s_dump->add_option("--index", dump.index)->required();
    s_dump->add_option("--term", dump.term, "Term (analyzed before lookup)");
    s_dump->add_option("--field", dump.field, "Field name");

    try {
        auto expanded = expand_config(args);
        std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kExitOk;
        }
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }

    try {
        if (s_ingest->parsed()) {
            cmd_ingest(ingest, common, out, err);
        } else if (s_index->parsed()) {
            cmd_index(index, common, out);
        } else if (s_lex->parsed()) {
            cmd_score_lexical(lexical, common, out);
        } else if (s_train->parsed()) {
            cmd_train(data, model, common, out, err);
        } else if (s_score->parsed()) {
            cmd_score(score, common);
        } else if (s_eval->parsed()) {
            cmd_evaluate(evaluate, common, out, err);
        } else if (s_ablate->parsed()) {
            cmd_ablate(ablate_data, ablate_model, common, dataset, out, err);
        } else if (s_dump->parsed()) {
            cmd_dump_postings(dump, out);
        }
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    return run(args, out, err);
}

}  // namespace prodsearch
