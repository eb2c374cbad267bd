#include "clirgen/config.hpp"

#include <fstream>
#include <set>

#include "clirgen/errors.hpp"

namespace clirgen {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

/// Reads keys from one JSON object and rejects any it was not asked about.
class Section {
public:
    Section(const json &j, std::string name) : j_(j), name_(std::move(name))
    {
        if (!j_.is_object()) {
            throw ConfigError("config section '" + name_ + "' must be an object");
        }
    }

    template <typename T>
    void get(const char *key, T &out)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) {
            return;
        }
        try {
            out = it->get<T>();
        } catch (const json::exception &e) {
            throw ConfigError("config key '" + path(key) + "': " + e.what());
        }
    }

    void path_value(const char *key, std::filesystem::path &out, const std::filesystem::path &base)
    {
        std::string s;
        get(key, s);
        if (!s.empty()) {
            out = resolve(s, base);
        }
    }

    void path_value(const char *key, std::optional<std::filesystem::path> &out,
                    const std::filesystem::path &base)
    {
        std::string s;
        get(key, s);
        if (!s.empty()) {
            out = resolve(s, base);
        }
    }

    std::optional<Section> sub(const char *key)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) {
            return std::nullopt;
        }
        return Section(*it, path(key));
    }

    bool has(const char *key) const { return j_.contains(key); }

    void finish() const
    {
        for (const auto &[k, v] : j_.items()) {
            if (!seen_.contains(k)) {
                throw ConfigError("unknown config key '" + path(k.c_str()) + "'");
            }
        }
    }

private:
    static std::filesystem::path resolve(const std::string &s, const std::filesystem::path &base)
    {
        std::filesystem::path p(s);
        return (p.is_relative() && !base.empty()) ? base / p : p;
    }

    std::string path(const char *key) const
    {
        return name_.empty() ? std::string(key) : name_ + "." + key;
    }

    const json &j_;
    std::string name_;
    std::set<std::string> seen_;
};

} // namespace

PipelineConfig PipelineConfig::from_json(const json &j, const std::filesystem::path &base_dir)
{
    PipelineConfig c;
    Section root(j, "");
    root.path_value("input", c.input, base_dir);
    root.path_value("work_dir", c.work_dir, base_dir);
    std::string genre = "news";
    root.get("genre", genre);
    c.genre = parse_genre(genre);
    root.get("lang", c.lang);
    root.get("seed", c.seed);
    root.get("max_error_rate", c.max_error_rate);

    if (auto s = root.sub("segment")) {
        s->get("window_tokens", c.segment.window_tokens);
        s->get("stride_tokens", c.segment.stride_tokens);
        s->finish();
    }
    if (auto s = root.sub("bm25")) {
        s->get("k1", c.bm25.k1);
        s->get("b", c.bm25.b);
        s->finish();
    }

    auto mode = c.genre == Genre::news ? PairingMode::news : PairingMode::tweet;
    auto pairing = root.sub("pairing");
    if (pairing) {
        std::string m;
        pairing->get("mode", m);
        if (!m.empty()) {
            mode = parse_pairing_mode(m);
        }
    }
    c.pairing = mode == PairingMode::news ? PairingConfig::news_defaults()
                                          : PairingConfig::tweet_defaults();
    if (pairing) {
        auto &p = c.pairing;
        pairing->get("count", c.pair_count);
        pairing->get("max_attempts", c.max_attempts);
        pairing->path_value("seed_queries", c.seed_queries, base_dir);
        pairing->get("ratio_threshold", p.ratio_threshold);
        pairing->get("lcs_min_outside_chars", p.lcs_min_outside_chars);
        pairing->get("lcs_min_outside_frac", p.lcs_min_outside_frac);
        pairing->get("exclude_same_document", p.exclude_same_document);
        pairing->get("unique_pairing", p.unique_pairing);
        pairing->get("candidate_pool_size", p.candidate_pool_size);
        std::map<std::string, std::size_t> mins;
        pairing->get("min_passage_chars", mins);
        for (const auto &[lang, n] : mins) {
            p.min_passage_chars[lang] = n;
        }
        pairing->finish();
    }

    if (auto s = root.sub("prompt")) {
        s->path_value("template", c.prompt_template, base_dir);
        s->get("queries_per_side", c.queries_per_side);
        s->get("model_input_limit", c.budget.model_input_limit);
        s->get("prompt_overhead_tokens", c.budget.prompt_overhead_tokens);
        s->get("min_tokens_per_passage", c.budget.min_tokens_per_passage);
        s->finish();
    }

    if (auto s = root.sub("generation")) {
        auto &g = c.generation;
        s->get("backend", g.backend);
        s->get("url", g.url);
        s->get("path", g.path);
        s->get("model", g.model);
        s->get("api_key_env", g.api_key_env);
        s->get("max_output_tokens", g.max_output_tokens);
        s->get("unit_cost_per_1k", g.unit_cost_per_1k);
        s->get("max_concurrent", g.throttle.max_concurrent);
        s->get("target_rate", g.throttle.target_rate);
        s->get("max_retries", g.throttle.max_retries);
        std::int64_t ms = g.throttle.backoff_initial.count();
        s->get("backoff_initial_ms", ms);
        g.throttle.backoff_initial = std::chrono::milliseconds(ms);
        s->get("backoff_multiplier", g.throttle.backoff_multiplier);
        ms = g.throttle.backoff_max.count();
        s->get("backoff_max_ms", ms);
        g.throttle.backoff_max = std::chrono::milliseconds(ms);
        s->path_value("mock_fixtures", g.mock_fixtures, base_dir);
        s->get("mock_billable", g.mock_billable);
        s->get("mock_latency_ms", g.mock_latency_ms);
        s->finish();
    }
    c.budget.reserved_output_tokens = c.generation.max_output_tokens;

    if (auto s = root.sub("validation")) {
        auto &v = c.validation;
        s->get("tau", v.tau);
        s->get("scorer", v.scorer);
        s->get("scorer_url", v.scorer_url);
        s->get("scorer_token_env", v.scorer_token_env);
        s->get("scorer_batch_limit", v.scorer_batch_limit);
        s->get("lexical_temperature", v.lexical_temperature);
        s->finish();
    }
    root.finish();
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path &file)
{
    std::ifstream in(file);
    if (!in) {
        throw ConfigError("cannot open config " + file.string());
    }
    auto j = json::parse(in, nullptr, false, /*ignore_comments=*/true);
    if (j.is_discarded()) {
        throw ConfigError("config " + file.string() + " is not valid JSON");
    }
    return from_json(j, file.parent_path());
}

void PipelineConfig::validate() const
{
    segment.validate();
    pairing.validate();
    generation.throttle.validate();
    budget.prompt_limit();
    if (bm25.k1 < 0.0 || bm25.b < 0.0 || bm25.b > 1.0) {
        throw ConfigError("bm25 parameters out of range");
    }
    if (!(validation.tau > 0.0 && validation.tau < 1.0)) {
        throw ConfigError("validation.tau must be in (0, 1)");
    }
    if (generation.backend != "mock" && generation.backend != "http") {
        throw ConfigError("generation.backend must be mock or http");
    }
    if (validation.scorer != "lexical" && validation.scorer != "http") {
        throw ConfigError("validation.scorer must be lexical or http");
    }
    if (queries_per_side == 0) {
        throw ConfigError("prompt.queries_per_side must be >= 1");
    }
    if (max_error_rate < 0.0 || max_error_rate > 1.0) {
        throw ConfigError("max_error_rate must be in [0, 1]");
    }
}

ojson PipelineConfig::to_json() const
{
    auto opt_path = [](const std::optional<std::filesystem::path> &p) {
        return p ? ojson(p->string()) : ojson(nullptr);
    };
    ojson j;
    j["input"] = input.string();
    j["work_dir"] = work_dir.string();
    j["genre"] = to_string(genre);
    j["lang"] = lang;
    j["seed"] = seed;
    j["max_error_rate"] = max_error_rate;
    j["segment"] = {{"window_tokens", segment.window_tokens},
                    {"stride_tokens", segment.stride_tokens}};
    j["bm25"] = {{"k1", bm25.k1}, {"b", bm25.b}};
    ojson mins(pairing.min_passage_chars);
    j["pairing"] = {{"mode", to_string(pairing.mode)},
                    {"count", pair_count},
                    {"max_attempts", max_attempts},
                    {"seed_queries", opt_path(seed_queries)},
                    {"ratio_threshold", pairing.ratio_threshold},
                    {"min_passage_chars", mins},
                    {"lcs_min_outside_chars", pairing.lcs_min_outside_chars},
                    {"lcs_min_outside_frac", pairing.lcs_min_outside_frac},
                    {"exclude_same_document", pairing.exclude_same_document},
                    {"unique_pairing", pairing.unique_pairing},
                    {"candidate_pool_size", pairing.candidate_pool_size}};
    j["prompt"] = {{"template", opt_path(prompt_template)},
                   {"queries_per_side", queries_per_side},
                   {"model_input_limit", budget.model_input_limit},
                   {"prompt_overhead_tokens", budget.prompt_overhead_tokens},
                   {"min_tokens_per_passage", budget.min_tokens_per_passage}};
    const auto &g = generation;
    j["generation"] = {{"backend", g.backend},
                       {"url", g.url},
                       {"path", g.path},
                       {"model", g.model},
                       {"api_key_env", g.api_key_env},
                       {"max_output_tokens", g.max_output_tokens},
                       {"unit_cost_per_1k", g.unit_cost_per_1k},
                       {"max_concurrent", g.throttle.max_concurrent},
                       {"target_rate", g.throttle.target_rate},
                       {"max_retries", g.throttle.max_retries},
                       {"backoff_initial_ms", g.throttle.backoff_initial.count()},
                       {"backoff_multiplier", g.throttle.backoff_multiplier},
                       {"backoff_max_ms", g.throttle.backoff_max.count()},
                       {"mock_fixtures", opt_path(g.mock_fixtures)},
                       {"mock_billable", g.mock_billable},
                       {"mock_latency_ms", g.mock_latency_ms}};
    const auto &v = validation;
    j["validation"] = {{"tau", v.tau},
                       {"scorer", v.scorer},
                       {"scorer_url", v.scorer_url},
                       {"scorer_token_env", v.scorer_token_env},
                       {"scorer_batch_limit", v.scorer_batch_limit},
                       {"lexical_temperature", v.lexical_temperature}};
    return j;
}

} // namespace clirgen
