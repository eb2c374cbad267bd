#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include "clirgen/config.hpp"
#include "clirgen/generation.hpp"
#include "clirgen/validator.hpp"

namespace clirgen::pipeline {

/// Artifact file names inside the work directory. Each stage reads only
/// these files, so any stage can be re-run from disk.
namespace artifacts {
inline constexpr std::string_view passages = "passages.jsonl";
inline constexpr std::string_view corpus_stats = "corpus_stats.json";
inline constexpr std::string_view index = "index.bm25";
inline constexpr std::string_view pairs = "pairs.jsonl";
inline constexpr std::string_view mining_stats = "mining_stats.json";
inline constexpr std::string_view prompts = "prompts.jsonl";
inline constexpr std::string_view checkpoint = "generation.ckpt.jsonl";
inline constexpr std::string_view generation_stats = "generation_stats.json";
inline constexpr std::string_view triples = "triples.jsonl";
inline constexpr std::string_view validation_stats = "validation_stats.json";
inline constexpr std::string_view triples_tsv = "triples.tsv";
inline constexpr std::string_view manifest = "manifest.json";
} // namespace artifacts

std::unique_ptr<GenerationBackend> make_backend(const PipelineConfig &cfg);
std::unique_ptr<RelevanceScorer> make_scorer(const PipelineConfig &cfg);

CorpusStats run_ingest(const PipelineConfig &cfg);

/// Throws DataError when there are no passages to index.
void run_index(const PipelineConfig &cfg);

MiningStats run_mine(const PipelineConfig &cfg);

struct GenerateOptions {
    GenerationBackend *backend = nullptr; // defaults to make_backend(cfg)
    std::size_t stop_after = 0;
};

struct GenerateSummary {
    std::size_t pairs = 0;
    std::size_t budget_rejected = 0;
    std::size_t truncated = 0;
    BatchResult batch;
};

GenerateSummary run_generate(const PipelineConfig &cfg, const GenerateOptions &opts = {});

/// Throws DataError if any rendered prompt lacks a generation outcome.
ValidationStats run_validate(const PipelineConfig &cfg, RelevanceScorer *scorer = nullptr);

/// Write the TSV export and the manifest.
nlohmann::ordered_json run_emit(const PipelineConfig &cfg, double wall_clock_seconds = -1.0);

/// Recompute the manifest purely from artifact files in the work directory.
nlohmann::ordered_json build_manifest(const PipelineConfig &cfg, double wall_clock_seconds = -1.0);

struct RunOptions {
    GenerationBackend *backend = nullptr;
    RelevanceScorer *scorer = nullptr;
    std::size_t stop_after = 0; // simulate an interrupted generation stage
};

struct RunResult {
    int exit_code = 0; // 0 ok, 1 fatal, 2 failure rate above threshold
    bool interrupted = false;
    std::string error;
    nlohmann::ordered_json manifest;
};

/// ingest -> segment -> index -> mine -> render -> generate -> parse ->
/// validate -> emit. Generation resumes from an existing checkpoint. On a
/// fatal error the manifest so far is still written.
RunResult run_all(const PipelineConfig &cfg, const RunOptions &opts = {});

} // namespace clirgen::pipeline
