#pragma once

#include <atomic>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>

#include "clirgen/config.hpp"
#include "clirgen/generation.hpp"
#include "clirgen/pipeline.hpp"
#include "clirgen/text.hpp"
#include "test_util.hpp"

namespace testutil {

inline clirgen::PipelineConfig run_config(std::string_view fixture_name, const fs::path &work)
{
    auto cfg = clirgen::PipelineConfig::load(fixture(fixture_name));
    cfg.work_dir = work;
    return cfg;
}

/// Mock backend that counts calls and can fail a deterministic subset of
/// prompts (by prompt hash) with a terminal error.
class CountingBackend : public clirgen::GenerationBackend {
public:
    explicit CountingBackend(std::uint64_t fail_every = 0) : fail_every_(fail_every) {}

    clirgen::GenerationResult generate(const std::string &prompt, std::size_t cap) override
    {
        ++calls;
        if (fail_every_ > 0
            && std::stoull(clirgen::text::fnv1a_hex(prompt), nullptr, 16) % fail_every_ == 0) {
            throw clirgen::TerminalError("content policy");
        }
        return inner_.generate(prompt, cap);
    }
    std::string name() const override { return "mock"; }

    std::atomic<std::size_t> calls{0};

private:
    std::uint64_t fail_every_;
    clirgen::MockBackend inner_;
};

/// Invariants every finished manifest must satisfy. Returns an empty string
/// when they hold, else a description of the first violation.
inline std::string check_manifest_identities(const nlohmann::ordered_json &m, const fs::path &work)
{
    const auto &q = m.at("queries");
    const auto &p = m.at("prompts");
    const auto &tok = m.at("tokens");
    const auto u = [](const nlohmann::ordered_json &j, const char *k) {
        return j.at(k).get<std::uint64_t>();
    };
    if (u(q, "generated") != u(q, "valid") + u(q, "rejected") + u(q, "scorer_error")) {
        return "generated != valid + rejected + scorer_error";
    }
    if (u(q, "inverted") > u(q, "rejected")) {
        return "inverted > rejected";
    }
    if (u(p, "issued") != u(p, "succeeded") + u(p, "failed")) {
        return "issued != succeeded + failed";
    }
    if (u(p, "rendered") != u(p, "issued") + u(p, "pending")) {
        return "rendered != issued + pending";
    }
    if (m.at("pairs").get<std::uint64_t>() != u(p, "rendered") + u(p, "budget_rejected")) {
        return "pairs != rendered + budget_rejected";
    }
    if (u(tok, "total") != u(tok, "prompt") + u(tok, "output")) {
        return "token total mismatch";
    }
    std::uint64_t pairs = 0, valid = 0;
    for (const auto &[k, v] : m.at("fanout_histogram").items()) {
        pairs += v.get<std::uint64_t>();
        valid += std::stoull(k) * v.get<std::uint64_t>();
    }
    if (pairs != u(p, "succeeded")) {
        return "fanout histogram does not cover every answered prompt";
    }
    if (valid != u(q, "valid")) {
        return "fanout histogram does not sum to the valid count";
    }
    const double tpp = u(p, "succeeded") == 0
                           ? 0.0
                           : static_cast<double>(u(q, "valid"))
                                 / static_cast<double>(u(p, "succeeded"));
    if (std::abs(m.at("triples_per_pair").get<double>() - tpp) > 1e-12) {
        return "triples_per_pair != valid / succeeded";
    }
    std::ifstream tsv(work / clirgen::pipeline::artifacts::triples_tsv);
    std::uint64_t lines = 0;
    for (std::string line; std::getline(tsv, line);) {
        ++lines;
    }
    if (lines != u(q, "valid")) {
        return "TSV rows != valid triples";
    }
    const auto nano = m.at("cost").at("total_nano_usd").get<std::int64_t>();
    std::int64_t sum = 0;
    for (const auto &o : clirgen::load_checkpoint(work / clirgen::pipeline::artifacts::checkpoint)) {
        sum += o.cost.cost_nano_usd;
    }
    if (nano != sum) {
        return "manifest cost != sum of per-prompt records";
    }
    return {};
}

} // namespace testutil
