#include "clirgen/generation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <thread>
#include <unordered_set>

#include <unistd.h>

#include <json.hpp>

#include "clirgen/errors.hpp"
#include "clirgen/pair_miner.hpp"
#include "clirgen/text.hpp"

namespace clirgen {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string_view to_string(OutcomeStatus s)
{
    return s == OutcomeStatus::ok ? "ok" : "failed";
}

// ---------------------------------------------------------------- mock backend

void MockBackend::load_fixtures(std::istream &in)
{
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("prompt_hash") || !j.contains("response")) {
            throw DataError("mock fixture line " + std::to_string(lineno) + " is malformed");
        }
        Fixture f;
        f.response = j["response"].get<std::string>();
        if (j.contains("prompt_tokens")) {
            f.prompt_tokens = j["prompt_tokens"].get<std::size_t>();
        }
        if (j.contains("output_tokens")) {
            f.output_tokens = j["output_tokens"].get<std::size_t>();
        }
        fixtures_[j["prompt_hash"].get<std::string>()] = std::move(f);
    }
}

void MockBackend::add_fixture(const std::string &prompt, Fixture f)
{
    fixtures_[text::fnv1a_hex(prompt)] = std::move(f);
}

GenerationResult MockBackend::generate(const std::string &prompt, std::size_t /*max_output_tokens*/)
{
    ++calls_;
    if (opts_.latency.count() > 0) {
        std::this_thread::sleep_for(opts_.latency);
    }
    if (auto it = fixtures_.find(text::fnv1a_hex(prompt)); it != fixtures_.end()) {
        return {it->second.response, it->second.prompt_tokens, it->second.output_tokens};
    }
    if (!opts_.synthesize_missing) {
        throw TerminalError("mock backend has no fixture for prompt " + text::fnv1a_hex(prompt));
    }
    return {synthesize(prompt), std::nullopt, std::nullopt};
}

namespace {

/// Extract the text between the n-th "<<" and the following ">>".
std::string delimited(const std::string &prompt, int nth)
{
    std::size_t pos = 0;
    for (int i = 0; i <= nth; ++i) {
        auto open = prompt.find("<<", pos);
        if (open == std::string::npos) {
            return {};
        }
        auto close = prompt.find(">>", open + 2);
        if (close == std::string::npos) {
            return {};
        }
        if (i == nth) {
            return prompt.substr(open + 2, close - open - 2);
        }
        pos = close + 2;
    }
    return {};
}

std::vector<std::string> unique_terms(const std::string &s)
{
    auto terms = text::analyze(s);
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (auto &t : terms) {
        if (text::code_point_length(t) >= 2 && seen.insert(t).second) {
            out.push_back(std::move(t));
        }
    }
    return out;
}

std::string pick_words(std::mt19937_64 &rng, const std::vector<std::string> &pool, std::size_t n)
{
    std::string out;
    if (pool.empty()) {
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!out.empty()) {
            out += ' ';
        }
        out += pool[rng() % pool.size()];
    }
    return out;
}

} // namespace

std::string MockBackend::synthesize(const std::string &prompt)
{
    const auto a = delimited(prompt, 0);
    const auto b = delimited(prompt, 1);
    const auto hash = std::stoull(text::fnv1a_hex(prompt), nullptr, 16);
    std::mt19937_64 rng(hash);

    const auto terms_a = unique_terms(a);
    const auto terms_b = unique_terms(b);
    const std::unordered_set<std::string> set_a(terms_a.begin(), terms_a.end());
    const std::unordered_set<std::string> set_b(terms_b.begin(), terms_b.end());
    std::vector<std::string> only_a;
    std::vector<std::string> only_b;
    std::vector<std::string> shared;
    for (const auto &t : terms_a) {
        (set_b.contains(t) ? shared : only_a).push_back(t);
    }
    for (const auto &t : terms_b) {
        if (!set_a.contains(t)) {
            only_b.push_back(t);
        }
    }
    if (only_a.empty()) {
        only_a = terms_a;
    }
    if (only_b.empty()) {
        only_b = terms_b;
    }
    if (shared.empty()) {
        shared = terms_a;
    }

    auto side = [&](const char *label, const std::vector<std::string> &mine,
                    const std::vector<std::string> &theirs) {
        std::string block = std::string("Document ") + label + ":\n";
        const std::size_t sizes[] = {4, 5, 5, 5, 5, 5, 6, 6};
        const auto n = sizes[rng() % std::size(sizes)];
        for (std::size_t i = 0; i < n; ++i) {
            const auto roll = rng() % 100;
            std::string line;
            if (roll < 78) {
                line = "Reports about " + pick_words(rng, mine, 4);
            } else if (roll < 88) {
                line = "Coverage of " + pick_words(rng, theirs, 4); // lands on the wrong side
            } else if (roll < 95) {
                line = "Discussion of " + pick_words(rng, shared, 3);
            } else {
                line = "Miscellaneous";
            }
            block += std::to_string(i + 1) + ". " + line + "\n";
        }
        return block;
    };
    auto out = side("A", only_a, only_b);
    out += "\n";
    out += side("B", only_b, only_a);
    return out;
}

// ---------------------------------------------------------------- costs

CostRecord make_cost_record(std::size_t prompt_tokens, std::size_t output_tokens,
                            double unit_cost_per_1k, bool estimated)
{
    if (!(unit_cost_per_1k >= 0.0)) {
        throw ConfigError("unit cost must be non-negative");
    }
    CostRecord r;
    r.prompt_tokens = prompt_tokens;
    r.output_tokens = output_tokens;
    r.estimated = estimated;
    // nano-USD per token, exact for any price given to 1e-6 USD per 1k.
    const auto per_token = std::llround(unit_cost_per_1k * 1e6);
    r.cost_nano_usd = static_cast<std::int64_t>(prompt_tokens + output_tokens) * per_token;
    return r;
}

// ---------------------------------------------------------------- throttling

void ThrottleConfig::validate() const
{
    if (max_concurrent < 1) {
        throw ConfigError("max_concurrent must be >= 1");
    }
    if (backoff_multiplier < 1.0) {
        throw ConfigError("backoff_multiplier must be >= 1");
    }
}

std::chrono::milliseconds ThrottleConfig::backoff(std::size_t retry) const
{
    const double ms = static_cast<double>(backoff_initial.count())
                      * std::pow(backoff_multiplier, static_cast<double>(retry));
    return std::chrono::milliseconds(
        static_cast<std::int64_t>(std::min(ms, static_cast<double>(backoff_max.count()))));
}

RateLimiter::RateLimiter(double rate_per_second)
{
    if (rate_per_second > 0.0) {
        enabled_ = true;
        interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(1.0 / rate_per_second));
    }
}

void RateLimiter::acquire()
{
    if (!enabled_) {
        return;
    }
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(mu_);
        slot = std::max(std::chrono::steady_clock::now(), next_);
        next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
}

// ---------------------------------------------------------------- checkpoint

namespace {

std::string checkpoint_line(const GenerationOutcome &o)
{
    ojson j;
    j["pair_id"] = o.pair_id;
    j["status"] = to_string(o.status);
    if (o.status == OutcomeStatus::ok) {
        j["response"] = o.response;
    } else {
        j["error"] = o.error;
    }
    j["prompt_tokens"] = o.cost.prompt_tokens;
    j["output_tokens"] = o.cost.output_tokens;
    j["tokens_estimated"] = o.cost.estimated;
    j["cost_nano_usd"] = o.cost.cost_nano_usd;
    j["attempts"] = o.attempts;
    return j.dump() + "\n";
}

GenerationOutcome outcome_from_json(const json &j)
{
    GenerationOutcome o;
    o.pair_id = j.at("pair_id").get<std::string>();
    o.status = j.at("status").get<std::string>() == "ok" ? OutcomeStatus::ok : OutcomeStatus::failed;
    o.response = j.value("response", "");
    o.error = j.value("error", "");
    o.cost.prompt_tokens = j.value("prompt_tokens", std::size_t{0});
    o.cost.output_tokens = j.value("output_tokens", std::size_t{0});
    o.cost.estimated = j.value("tokens_estimated", false);
    o.cost.cost_nano_usd = j.value("cost_nano_usd", std::int64_t{0});
    o.attempts = j.value("attempts", std::size_t{0});
    return o;
}

class CheckpointWriter {
public:
    explicit CheckpointWriter(const std::filesystem::path &path)
    {
        if (path.empty()) {
            return;
        }
        file_ = std::fopen(path.c_str(), "ab");
        if (file_ == nullptr) {
            throw IoError("cannot open checkpoint " + path.string());
        }
    }
    CheckpointWriter(const CheckpointWriter &) = delete;
    CheckpointWriter &operator=(const CheckpointWriter &) = delete;
    ~CheckpointWriter()
    {
        if (file_ != nullptr) {
            std::fclose(file_);
        }
    }

    void append(const std::string &line)
    {
        if (file_ == nullptr) {
            return;
        }
        if (std::fwrite(line.data(), 1, line.size(), file_) != line.size()
            || std::fflush(file_) != 0 || ::fsync(::fileno(file_)) != 0) {
            throw IoError("checkpoint write failed");
        }
    }

private:
    std::FILE *file_ = nullptr;
};

} // namespace

std::vector<GenerationOutcome> load_checkpoint(const std::filesystem::path &path, bool repair)
{
    std::vector<GenerationOutcome> out;
    if (path.empty() || !std::filesystem::exists(path)) {
        return out;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read checkpoint " + path.string());
    }
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    std::size_t good_end = 0;
    std::size_t lineno = 0;
    while (pos < content.size()) {
        auto nl = content.find('\n', pos);
        ++lineno;
        if (nl == std::string::npos) {
            break; // torn final record
        }
        auto line = std::string_view(content).substr(pos, nl - pos);
        if (!line.empty()) {
            auto j = json::parse(line, nullptr, false);
            if (j.is_discarded()) {
                throw DataError("checkpoint line " + std::to_string(lineno) + " is corrupt");
            }
            out.push_back(outcome_from_json(j));
        }
        pos = nl + 1;
        good_end = pos;
    }
    if (repair && good_end < content.size()) {
        std::filesystem::resize_file(path, good_end);
    }
    return out;
}

// ---------------------------------------------------------------- runner

BatchResult run_batch(std::span<const PromptJob> jobs, GenerationBackend &backend,
                      const ThrottleConfig &throttle, const BatchOptions &opts)
{
    throttle.validate();
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (!position.emplace(jobs[i].pair_id, i).second) {
            throw ConfigError("duplicate pair_id in batch: " + jobs[i].pair_id);
        }
    }

    BatchResult result;
    std::vector<std::optional<GenerationOutcome>> slots(jobs.size());
    for (auto &o : load_checkpoint(opts.checkpoint, /*repair=*/true)) {
        auto it = position.find(o.pair_id);
        if (it != position.end() && !slots[it->second]) {
            slots[it->second] = std::move(o);
            ++result.resumed;
        }
    }
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (!slots[i]) {
            pending.push_back(i);
        }
    }

    CheckpointWriter writer(opts.checkpoint);
    RateLimiter limiter(throttle.target_rate);
    std::mutex record_mu;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::atomic<std::size_t> completed{0};
    std::atomic<std::size_t> in_flight{0};
    std::atomic<std::size_t> max_in_flight{0};
    std::exception_ptr fatal;

    auto call_once = [&](const PromptJob &job) {
        limiter.acquire();
        const auto now = ++in_flight;
        auto seen = max_in_flight.load();
        while (now > seen && !max_in_flight.compare_exchange_weak(seen, now)) {
        }
        struct Release {
            std::atomic<std::size_t> &n;
            ~Release() { --n; }
        } release{in_flight};
        return backend.generate(job.prompt, opts.max_output_tokens);
    };

    auto process = [&](const PromptJob &job) {
        GenerationOutcome o;
        o.pair_id = job.pair_id;
        for (;;) {
            ++o.attempts;
            try {
                auto r = call_once(job);
                const bool estimated = !r.prompt_tokens || !r.output_tokens;
                const auto pt = r.prompt_tokens ? *r.prompt_tokens : opts.estimator(job.prompt);
                const auto ot = r.output_tokens ? *r.output_tokens : opts.estimator(r.text);
                o.cost = make_cost_record(pt, ot, backend.billable() ? opts.unit_cost_per_1k : 0.0,
                                          estimated);
                o.response = std::move(r.text);
                o.status = OutcomeStatus::ok;
                return o;
            } catch (const TransientError &e) {
                if (o.attempts > throttle.max_retries) {
                    o.status = OutcomeStatus::failed;
                    o.error = std::string("retries exhausted: ") + e.what();
                    return o;
                }
                std::this_thread::sleep_for(throttle.backoff(o.attempts - 1));
            } catch (const std::exception &e) {
                o.status = OutcomeStatus::failed;
                o.error = e.what();
                return o;
            }
        }
    };

    auto worker = [&] {
        while (!stop.load()) {
            const auto k = next++;
            if (k >= pending.size()) {
                return;
            }
            const auto idx = pending[k];
            auto outcome = process(jobs[idx]);
            {
                std::lock_guard lock(record_mu);
                try {
                    writer.append(checkpoint_line(outcome));
                } catch (...) {
                    if (!fatal) {
                        fatal = std::current_exception();
                    }
                    stop = true;
                    return;
                }
                if (opts.on_complete) {
                    opts.on_complete(outcome);
                }
                slots[idx] = std::move(outcome);
            }
            const auto done = ++completed;
            if (opts.stop_after > 0 && done >= opts.stop_after) {
                stop = true;
            }
        }
    };

    const auto nthreads = std::min(throttle.max_concurrent, pending.size());
    {
        std::vector<std::jthread> pool;
        pool.reserve(nthreads);
        for (std::size_t t = 0; t < nthreads; ++t) {
            pool.emplace_back(worker);
        }
    }
    if (fatal) {
        std::rethrow_exception(fatal);
    }

    result.issued = completed.load();
    result.max_in_flight = max_in_flight.load();
    for (auto &s : slots) {
        if (!s) {
            result.interrupted = true;
            continue;
        }
        if (s->status == OutcomeStatus::failed) {
            ++result.failed;
        }
        result.outcomes.push_back(std::move(*s));
    }
    return result;
}

} // namespace clirgen
