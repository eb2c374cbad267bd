#ifdef CLIRGEN_WITH_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <json.hpp>

#include "clirgen/errors.hpp"
#include "clirgen/generation.hpp"
#include "clirgen/validator.hpp"

namespace clirgen {

using json = nlohmann::json;

namespace {

bool is_transient_status(int status)
{
    return status == 408 || status == 429 || status >= 500;
}

httplib::Client make_client(const std::string &base_url, std::chrono::seconds timeout)
{
    httplib::Client cli(base_url);
    if (!cli.is_valid()) {
        throw ConfigError("invalid URL: " + base_url);
    }
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    return cli;
}

} // namespace

HttpBackend::HttpBackend(Options opts) : opts_(std::move(opts)) {}

GenerationResult HttpBackend::generate(const std::string &prompt, std::size_t max_output_tokens)
{
    auto cli = make_client(opts_.base_url, opts_.timeout);
    httplib::Headers headers;
    if (!opts_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + opts_.api_key);
    }
    json body = {{"model", opts_.model},
                 {"prompt", prompt},
                 {"max_tokens", max_output_tokens},
                 {"temperature", opts_.temperature}};
    auto res = cli.Post(opts_.path, headers, body.dump(), "application/json");
    if (!res) {
        throw TransientError("request failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        auto msg = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300);
        if (is_transient_status(res->status)) {
            throw TransientError(msg);
        }
        throw TerminalError(msg);
    }
    auto j = json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array()
        || j["choices"].empty()) {
        throw TerminalError("malformed completion response");
    }
    const auto &choice = j["choices"][0];
    GenerationResult out;
    if (choice.contains("text") && choice["text"].is_string()) {
        out.text = choice["text"].get<std::string>();
    } else if (choice.contains("message") && choice["message"].contains("content")) {
        out.text = choice["message"]["content"].get<std::string>();
    } else {
        throw TerminalError("completion response has no text");
    }
    if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
        if (u->contains("prompt_tokens")) {
            out.prompt_tokens = (*u)["prompt_tokens"].get<std::size_t>();
        }
        if (u->contains("completion_tokens")) {
            out.output_tokens = (*u)["completion_tokens"].get<std::size_t>();
        }
    }
    return out;
}

HttpScorer::HttpScorer(Options opts) : opts_(std::move(opts))
{
    if (opts_.batch_limit == 0) {
        throw ConfigError("scorer batch limit must be >= 1");
    }
}

std::vector<double> HttpScorer::score_batch(std::span<const ScoreItem> items)
{
    std::vector<double> out;
    out.reserve(items.size());
    auto cli = make_client(opts_.base_url, std::chrono::seconds(opts_.timeout_seconds));
    httplib::Headers headers;
    if (!opts_.token.empty()) {
        headers.emplace("Authorization", "Bearer " + opts_.token);
    }
    for (std::size_t start = 0; start < items.size(); start += opts_.batch_limit) {
        const auto len = std::min(opts_.batch_limit, items.size() - start);
        json req;
        req["items"] = json::array();
        for (const auto &it : items.subspan(start, len)) {
            req["items"].push_back({{"query", it.query}, {"passage", it.passage}});
        }
        if (opts_.model_id) {
            req["model_id"] = *opts_.model_id;
        }
        auto res = cli.Post("/score", headers, req.dump(), "application/json");
        if (!res) {
            throw std::runtime_error("scorer request failed: " + httplib::to_string(res.error()));
        }
        if (res->status != 200) {
            throw std::runtime_error("scorer returned HTTP " + std::to_string(res->status));
        }
        auto j = json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("scores") || !j["scores"].is_array()
            || j["scores"].size() != len) {
            throw std::runtime_error("scorer response does not match request length");
        }
        for (const auto &s : j["scores"]) {
            out.push_back(s.get<double>());
        }
        model_id_ = j.value("model_id", "");
        version_ = j.value("version", "");
    }
    return out;
}

} // namespace clirgen
