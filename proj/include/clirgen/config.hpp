#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "clirgen/bm25.hpp"
#include "clirgen/corpus.hpp"
#include "clirgen/generation.hpp"
#include "clirgen/pair_miner.hpp"
#include "clirgen/prompt.hpp"

namespace clirgen {

struct GenerationSettings {
    std::string backend = "mock"; // mock | http
    std::string url = "https://api.openai.com";
    std::string path = "/v1/completions";
    std::string model = "text-davinci-003";
    std::string api_key_env = "CLIRGEN_API_KEY";
    std::size_t max_output_tokens = 512;
    double unit_cost_per_1k = 0.02;
    ThrottleConfig throttle;
    std::optional<std::filesystem::path> mock_fixtures;
    bool mock_billable = true; // mock runs report the cost a priced backend would charge
    std::size_t mock_latency_ms = 0;
};

struct ValidationSettings {
    double tau = 0.15;
    std::string scorer = "lexical"; // lexical | http
    std::string scorer_url = "http://127.0.0.1:8080";
    std::string scorer_token_env = "CLIRGEN_SCORER_TOKEN";
    std::size_t scorer_batch_limit = 64;
    double lexical_temperature = 10.0;
};

/// Every tunable of a run. Values absent from the config file keep the
/// defaults below; pairing defaults follow the genre.
struct PipelineConfig {
    std::filesystem::path input;
    std::filesystem::path work_dir = "run";
    Genre genre = Genre::news;
    std::string lang = "zho";
    std::uint64_t seed = 0;

    SegmentConfig segment;
    Bm25Params bm25;

    PairingConfig pairing = PairingConfig::news_defaults();
    std::size_t pair_count = 100;    // news mode target
    std::size_t max_attempts = 0;    // 0 = 20 * pair_count + 100
    std::optional<std::filesystem::path> seed_queries; // tweet mode

    std::optional<std::filesystem::path> prompt_template;
    std::size_t queries_per_side = 5;
    TokenBudget budget;

    GenerationSettings generation;
    ValidationSettings validation;

    double max_error_rate = 0.05;

    /// Parse a config document. Relative paths resolve against `base_dir`.
    /// Unknown keys are rejected.
    static PipelineConfig from_json(const nlohmann::json &j,
                                    const std::filesystem::path &base_dir = {});
    static PipelineConfig load(const std::filesystem::path &file);

    nlohmann::ordered_json to_json() const;
    void validate() const;

    std::filesystem::path artifact(std::string_view name) const { return work_dir / name; }
};

} // namespace clirgen
