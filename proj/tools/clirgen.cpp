// clirgen: command-line front end for the triple-generation pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "clirgen/assess.hpp"
#include "clirgen/errors.hpp"
#include "clirgen/pipeline.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace clirgen;

namespace {

/// Flags shared by the stage subcommands. Anything set here overrides the
/// config file.
struct Overrides {
    std::string config;
    std::string input;
    std::string work_dir;
    std::string genre;
    std::string lang;
    std::optional<std::size_t> window;
    std::optional<std::size_t> stride;
    std::string mode;
    std::optional<double> ratio_threshold;
    std::optional<std::size_t> min_chars;
    std::optional<std::uint64_t> seed;
    std::string seed_queries;
    std::optional<std::size_t> count;
    std::string template_file;
    std::string backend;
    std::string mock_fixtures;
    std::optional<double> rate;
    std::optional<std::size_t> concurrency;
    std::optional<std::size_t> max_output_tokens;
    std::optional<double> tau;
    std::string scorer;
    std::string scorer_url;
    std::size_t stop_after = 0;
};

void add_common(CLI::App *cmd, Overrides &o)
{
    cmd->add_option("-c,--config", o.config, "JSON config file");
    cmd->add_option("--input", o.input, "raw corpus, one JSON record per line");
    cmd->add_option("-w,--work-dir", o.work_dir, "directory for stage artifacts");
    cmd->add_option("--genre", o.genre, "news or tweet");
    cmd->add_option("--lang", o.lang, "corpus language code");
    cmd->add_option("--window", o.window, "passage window in tokens");
    cmd->add_option("--stride", o.stride, "passage stride in tokens");
    cmd->add_option("--mode", o.mode, "pairing mode: news or tweet");
    cmd->add_option("--ratio-threshold", o.ratio_threshold, "negative/positive score ratio bound");
    cmd->add_option("--min-chars", o.min_chars, "minimum passage length for --lang");
    cmd->add_option("--seed", o.seed, "RNG seed");
    cmd->add_option("--seed-queries", o.seed_queries, "seed queries for tweet pairing");
    cmd->add_option("--count", o.count, "number of pairs to mine (news)");
    cmd->add_option("--template", o.template_file, "prompt template file");
    cmd->add_option("--backend", o.backend, "mock or http");
    cmd->add_option("--mock-fixtures", o.mock_fixtures, "mock backend fixture file");
    cmd->add_option("--rate", o.rate, "generation requests per second");
    cmd->add_option("--concurrency", o.concurrency, "max concurrent generation requests");
    cmd->add_option("--max-output-tokens", o.max_output_tokens, "generation output cap");
    cmd->add_option("--tau", o.tau, "margin threshold");
    cmd->add_option("--scorer", o.scorer, "lexical or http");
    cmd->add_option("--scorer-url", o.scorer_url, "scoring service base URL");
    cmd->add_option("--stop-after", o.stop_after)->group("");
}

std::string absolute(const std::string &p)
{
    return fs::absolute(p).string();
}

PipelineConfig resolve_config(const Overrides &o)
{
    json j = json::object();
    fs::path base;
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) {
            throw ConfigError("cannot open config " + o.config);
        }
        j = json::parse(in, nullptr, false, true);
        if (j.is_discarded() || !j.is_object()) {
            throw ConfigError("config " + o.config + " is not a JSON object");
        }
        base = fs::absolute(o.config).parent_path();
    }
    auto set = [&](const char *section, const char *key, const json &v) {
        if (section) {
            if (!j.contains(section) || j[section].is_null()) {
                j[section] = json::object();
            }
            j[section][key] = v;
        } else {
            j[key] = v;
        }
    };
    if (!o.input.empty()) set(nullptr, "input", absolute(o.input));
    if (!o.work_dir.empty()) set(nullptr, "work_dir", absolute(o.work_dir));
    if (!o.genre.empty()) set(nullptr, "genre", o.genre);
    if (!o.lang.empty()) set(nullptr, "lang", o.lang);
    if (o.seed) set(nullptr, "seed", *o.seed);
    if (o.window) set("segment", "window_tokens", *o.window);
    if (o.stride) set("segment", "stride_tokens", *o.stride);
    if (!o.mode.empty()) set("pairing", "mode", o.mode);
    if (o.ratio_threshold) set("pairing", "ratio_threshold", *o.ratio_threshold);
    if (!o.seed_queries.empty()) set("pairing", "seed_queries", absolute(o.seed_queries));
    if (o.count) set("pairing", "count", *o.count);
    if (o.min_chars) {
        const std::string lang = o.lang.empty() ? j.value("lang", std::string("zho")) : o.lang;
        set("pairing", "min_passage_chars", json::object());
        j["pairing"]["min_passage_chars"][lang] = *o.min_chars;
    }
    if (!o.template_file.empty()) set("prompt", "template", absolute(o.template_file));
    if (!o.backend.empty()) set("generation", "backend", o.backend);
    if (!o.mock_fixtures.empty()) set("generation", "mock_fixtures", absolute(o.mock_fixtures));
    if (o.rate) set("generation", "target_rate", *o.rate);
    if (o.concurrency) set("generation", "max_concurrent", *o.concurrency);
    if (o.max_output_tokens) set("generation", "max_output_tokens", *o.max_output_tokens);
    if (o.tau) set("validation", "tau", *o.tau);
    if (!o.scorer.empty()) set("validation", "scorer", o.scorer);
    if (!o.scorer_url.empty()) set("validation", "scorer_url", o.scorer_url);
    return PipelineConfig::from_json(j, base);
}

void print_json(const nlohmann::ordered_json &j)
{
    std::cout << j.dump(2) << '\n';
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Build cross-language retrieval training triples from a raw corpus"};
    app.require_subcommand(1);
    Overrides o;

    auto *ingest = app.add_subcommand("ingest", "normalize and segment the corpus");
    auto *index = app.add_subcommand("index", "build or query the BM25 index");
    auto *index_build = index->add_subcommand("build", "build the index from passages");
    auto *index_search = index->add_subcommand("search", "run one query against the index");
    index->require_subcommand(0, 1);
    auto *mine = app.add_subcommand("mine", "mine passage pairs");
    auto *generate = app.add_subcommand("generate", "render prompts and generate queries");
    auto *validate = app.add_subcommand("validate", "parse responses and score triples");
    auto *emit = app.add_subcommand("emit", "write the TSV export and manifest");
    auto *run = app.add_subcommand("run", "all stages end to end");
    auto *stats = app.add_subcommand("stats", "print the manifest recomputed from artifacts");
    auto *assess_cmd = app.add_subcommand("assess", "label a sample of triples by hand");

    for (auto *cmd : {ingest, index, mine, generate, validate, emit, run, stats, assess_cmd}) {
        add_common(cmd, o);
    }
    for (auto *cmd : {index_build, index_search}) {
        add_common(cmd, o);
    }

    std::string query;
    std::size_t k = 10;
    index_search->add_option("-q,--query", query, "query text")->required();
    index_search->add_option("-k", k, "number of hits");

    std::string triples_file;
    std::string labels_file;
    std::size_t sample_size = 61;
    bool summary_only = false;
    bool include_rejected = false;
    assess_cmd->add_option("--triples", triples_file, "triples file (default: work dir)");
    assess_cmd->add_option("--labels", labels_file, "labels file (default: work dir)");
    assess_cmd->add_option("-n,--sample-size", sample_size, "number of triples to label");
    assess_cmd->add_flag("--summary", summary_only, "only summarize an existing labels file");
    assess_cmd->add_flag("--include-rejected", include_rejected, "sample rejected triples too");

    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = resolve_config(o);
        if (*ingest) {
            auto s = pipeline::run_ingest(cfg);
            std::cout << "documents " << s.documents_read << ", passages " << s.passages_emitted
                      << ", malformed " << s.records_malformed << ", dropped "
                      << s.documents_dropped << "\n";
        } else if (*index) {
            if (*index_search) {
                std::ifstream in(cfg.artifact(pipeline::artifacts::index));
                if (!in) {
                    throw IoError("no index in " + cfg.work_dir.string());
                }
                auto idx = Bm25Index::load(in);
                for (const auto &h : idx.search(query, k)) {
                    std::printf("%zu\t%s\t%.6f\n", h.rank, h.passage_id.c_str(), h.score);
                }
            } else {
                pipeline::run_index(cfg);
                std::cout << "index written to " << cfg.artifact(pipeline::artifacts::index)
                          << "\n";
            }
        } else if (*mine) {
            auto s = pipeline::run_mine(cfg);
            std::cout << "pairs " << s.pairs << " from " << s.attempts << " attempts\n";
        } else if (*generate) {
            auto s = pipeline::run_generate(cfg, {nullptr, o.stop_after});
            std::cout << "prompts " << s.batch.outcomes.size() << " done (" << s.batch.resumed
                      << " resumed, " << s.batch.issued << " issued, " << s.batch.failed
                      << " failed), budget rejected " << s.budget_rejected << "\n";
            if (s.batch.interrupted) {
                std::cerr << "generation stopped early; run generate again to resume\n";
                return 1;
            }
        } else if (*validate) {
            auto s = pipeline::run_validate(cfg);
            std::cout << "generated " << s.generated_count << ", valid " << s.valid_count
                      << ", rejected " << s.rejected_count << ", scorer errors "
                      << s.scorer_error_count << "\n";
        } else if (*emit) {
            print_json(pipeline::run_emit(cfg));
        } else if (*run) {
            auto r = pipeline::run_all(cfg, {nullptr, nullptr, o.stop_after});
            print_json(r.manifest);
            if (!r.error.empty()) {
                std::cerr << "error: " << r.error << "\n";
            }
            return r.exit_code;
        } else if (*stats) {
            print_json(pipeline::build_manifest(cfg));
        } else if (*assess_cmd) {
            const fs::path labels = labels_file.empty()
                                        ? cfg.artifact("assessment_labels.jsonl")
                                        : fs::path(labels_file);
            assess::Report report;
            if (summary_only) {
                std::ifstream in(labels);
                if (!in) {
                    throw IoError("cannot open " + labels.string());
                }
                auto records = assess::read_records(in);
                report = assess::summarize(records);
            } else {
                const fs::path tf = triples_file.empty()
                                        ? cfg.artifact(pipeline::artifacts::triples)
                                        : fs::path(triples_file);
                std::ifstream in(tf);
                if (!in) {
                    throw IoError("cannot open " + tf.string());
                }
                auto triples = read_triples(in);
                if (triples.empty()) {
                    throw DataError("no triples to assess");
                }
                assess::SessionOptions so;
                so.sample_size = sample_size;
                so.seed = cfg.seed;
                so.labels = labels;
                so.valid_only = !include_rejected;
                auto r = assess::run_session(triples, so, std::cin, std::cout);
                report = r.report;
                if (!r.completed) {
                    std::cout << "\nsession paused; rerun with the same seed to continue\n";
                }
            }
            std::cout << "labeled " << report.total << "\n";
            for (std::size_t i = 0; i < assess::category_count; ++i) {
                std::cout << "  " << assess::to_string(static_cast<assess::Category>(i)) << " "
                          << report.counts[i] << "\n";
            }
            std::cout << "strict accuracy  " << assess::format_percent(report.strict) << "\n"
                      << "lenient accuracy " << assess::format_percent(report.lenient) << "\n";
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
