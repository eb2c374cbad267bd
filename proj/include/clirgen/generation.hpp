#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "clirgen/prompt.hpp"

namespace clirgen {

/// Retryable backend failure (rate limited, overloaded, connection reset).
struct TransientError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-retryable backend failure (auth, content policy, bad request).
struct TerminalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GenerationResult {
    std::string text;
    std::optional<std::size_t> prompt_tokens;
    std::optional<std::size_t> output_tokens;
};

/// A text-generation service. Implementations must tolerate concurrent calls.
class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;
    virtual GenerationResult generate(const std::string &prompt, std::size_t max_output_tokens) = 0;
    virtual std::string name() const = 0;
    /// Whether calls are priced. Unpriced backends produce zero-cost records.
    virtual bool billable() const { return true; }
};

/// Deterministic offline backend. Responses come from fixtures keyed by the
/// prompt's FNV-1a hash; prompts without a fixture get a synthetic response
/// derived from the two documents in the prompt, seeded by the same hash.
class MockBackend : public GenerationBackend {
public:
    struct Fixture {
        std::string response;
        std::optional<std::size_t> prompt_tokens;
        std::optional<std::size_t> output_tokens;
    };

    struct Options {
        bool synthesize_missing = true;
        bool billable = false;
        std::chrono::milliseconds latency{0};
    };

    MockBackend() = default;
    explicit MockBackend(Options opts) : opts_(opts) {}

    /// Lines of {"prompt_hash", "response", "prompt_tokens"?, "output_tokens"?}.
    void load_fixtures(std::istream &in);
    void add_fixture(const std::string &prompt, Fixture f);

    GenerationResult generate(const std::string &prompt, std::size_t max_output_tokens) override;
    std::string name() const override { return "mock"; }
    bool billable() const override { return opts_.billable; }

    std::size_t calls() const { return calls_.load(); }

    /// The synthetic response for a prompt, as generate() would return it.
    static std::string synthesize(const std::string &prompt);

private:
    Options opts_;
    std::unordered_map<std::string, Fixture> fixtures_;
    std::atomic<std::size_t> calls_{0};
};

/// OpenAI-style completions endpoint: POST {base_url}/v1/completions.
class HttpBackend : public GenerationBackend {
public:
    struct Options {
        std::string base_url = "https://api.openai.com";
        std::string path = "/v1/completions";
        std::string model = "text-davinci-003";
        std::string api_key; // sent as a bearer token when non-empty
        double temperature = 0.0;
        std::chrono::seconds timeout{120};
    };

    explicit HttpBackend(Options opts);

    GenerationResult generate(const std::string &prompt, std::size_t max_output_tokens) override;
    std::string name() const override { return "http"; }

private:
    Options opts_;
};

struct CostRecord {
    std::size_t prompt_tokens = 0;
    std::size_t output_tokens = 0;
    bool estimated = false;        // counts came from the local estimator
    std::int64_t cost_nano_usd = 0; // exact, so totals are additive

    double cost_usd() const { return static_cast<double>(cost_nano_usd) * 1e-9; }
};

/// cost = (prompt + output tokens) / 1000 * unit_cost_per_1k, in nano-USD.
CostRecord make_cost_record(std::size_t prompt_tokens, std::size_t output_tokens,
                            double unit_cost_per_1k, bool estimated = false);

struct ThrottleConfig {
    std::size_t max_concurrent = 10;
    double target_rate = 2.0; // requests per second; <= 0 disables the limiter
    std::size_t max_retries = 5;
    std::chrono::milliseconds backoff_initial{1000};
    double backoff_multiplier = 2.0;
    std::chrono::milliseconds backoff_max{30000};

    void validate() const;
    std::chrono::milliseconds backoff(std::size_t retry) const;
};

/// Spaces request starts at least 1/rate seconds apart across all threads.
class RateLimiter {
public:
    explicit RateLimiter(double rate_per_second);
    void acquire();

private:
    std::mutex mu_;
    std::chrono::steady_clock::duration interval_{};
    std::chrono::steady_clock::time_point next_{};
    bool enabled_ = false;
};

enum class OutcomeStatus { ok, failed };

struct GenerationOutcome {
    std::string pair_id;
    OutcomeStatus status = OutcomeStatus::ok;
    std::string response;
    std::string error;
    CostRecord cost;
    std::size_t attempts = 0;
};

struct PromptJob {
    std::string pair_id;
    std::string prompt;
};

struct BatchOptions {
    std::filesystem::path checkpoint;
    std::size_t max_output_tokens = 512;
    double unit_cost_per_1k = 0.02;
    TokenEstimator estimator = estimate_tokens;
    /// Stop dispatching after this many new completions (0 = never). Used to
    /// simulate an interrupted run.
    std::size_t stop_after = 0;
    /// Called once per newly completed prompt, in completion order.
    std::function<void(const GenerationOutcome &)> on_complete;
};

struct BatchResult {
    std::vector<GenerationOutcome> outcomes; // input order; missing if interrupted
    std::size_t resumed = 0;                 // outcomes replayed from the checkpoint
    std::size_t issued = 0;                  // prompts completed by this run
    std::size_t failed = 0;
    std::size_t max_in_flight = 0;
    bool interrupted = false;
};

/// Run every job through `backend` with bounded concurrency and a global rate
/// limit. Each completion is appended to the checkpoint before it is
/// reported; jobs already present in the checkpoint are not re-issued.
/// Throws IoError if the checkpoint cannot be written.
BatchResult run_batch(std::span<const PromptJob> jobs, GenerationBackend &backend,
                      const ThrottleConfig &throttle, const BatchOptions &opts);

/// Completed outcomes from a checkpoint file. A torn final line (from a
/// crash mid-write) is ignored; when `repair` is set it is also cut off.
std::vector<GenerationOutcome> load_checkpoint(const std::filesystem::path &path,
                                               bool repair = false);

std::string_view to_string(OutcomeStatus s);

} // namespace clirgen
