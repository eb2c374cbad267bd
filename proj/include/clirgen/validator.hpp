#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clirgen/prompt.hpp"

namespace clirgen {

struct ScoreItem {
    std::string query;
    std::string passage;
};

/// F(q, p): a real-valued relevance score, higher is more relevant.
class RelevanceScorer {
public:
    virtual ~RelevanceScorer() = default;
    /// One score per item, in item order. May throw; callers treat that as a
    /// scorer error for the whole batch.
    virtual std::vector<double> score_batch(std::span<const ScoreItem> items) = 0;
    virtual std::string name() const = 0;
    virtual std::size_t batch_limit() const { return 256; }
};

/// Non-semantic fallback: temperature * |q ∩ p| / sqrt(|q| * |p|) over
/// analyzer token sets. Only meaningful when query and passage share a script.
class LexicalScorer : public RelevanceScorer {
public:
    explicit LexicalScorer(double temperature = 10.0) : temperature_(temperature) {}

    double score(std::string_view query, std::string_view passage) const;
    std::vector<double> score_batch(std::span<const ScoreItem> items) override;
    std::vector<double> score_batch_serial(std::span<const ScoreItem> items) const;
    std::string name() const override { return "lexical"; }
    double temperature() const { return temperature_; }

private:
    double temperature_;
};

/// Client for a cross-encoder scoring service speaking
/// POST /score {"items":[{"query","passage"}]} -> {"scores":[...], ...}.
class HttpScorer : public RelevanceScorer {
public:
    struct Options {
        std::string base_url = "http://127.0.0.1:8080";
        std::string token; // optional shared token, sent as a bearer token
        std::size_t batch_limit = 64;
        std::optional<std::string> model_id;
        int timeout_seconds = 60;
    };

    explicit HttpScorer(Options opts);
    std::vector<double> score_batch(std::span<const ScoreItem> items) override;
    std::string name() const override { return "http"; }
    std::size_t batch_limit() const override { return opts_.batch_limit; }

    /// Model id and version reported by the last successful response.
    const std::string &model_id() const { return model_id_; }
    const std::string &model_version() const { return version_; }

private:
    Options opts_;
    std::string model_id_;
    std::string version_;
};

/// Two-way softmax probability of the positive minus that of the negative,
/// equal to tanh((pos - neg) / 2). Stable for large magnitudes. Throws
/// std::domain_error for non-finite input.
double margin(double score_pos, double score_neg);

/// Raw score difference at which margin() equals tau: 2 * atanh(tau).
double raw_score_threshold(double tau);

enum class RejectionReason { margin_below_tau, inverted, scorer_error };

std::string_view to_string(RejectionReason r);

struct Triple {
    std::string triple_id;
    std::string pair_id;
    std::string query;
    QueryTarget target = QueryTarget::A;
    std::string positive_id;
    std::string negative_id;
    std::string positive_text;
    std::string negative_text;
    double score_pos = 0.0;
    double score_neg = 0.0;
    double margin = 0.0;
    bool valid = false;
    std::optional<RejectionReason> rejection;
    bool truncated = false;
};

/// What validation needs to know about a prompted pair: ids and the exact
/// (possibly truncated) texts that were shown to the generator.
struct PairContext {
    std::string pair_id;
    std::string first_id; // document A, the mined positive
    std::string second_id;
    std::string first_text;
    std::string second_text;
    bool truncated = false;
};

struct ValidationStats {
    std::uint64_t generated_count = 0;
    std::uint64_t valid_count = 0;
    std::uint64_t rejected_count = 0; // margin_below_tau or inverted
    std::uint64_t inverted_count = 0;
    std::uint64_t scorer_error_count = 0;
    std::uint64_t pair_count = 0;
    std::map<std::size_t, std::uint64_t> fanout_histogram; // valid triples per pair -> pairs

    double triples_per_pair() const
    {
        return pair_count == 0 ? 0.0
                               : static_cast<double>(valid_count) / static_cast<double>(pair_count);
    }
};

struct ValidationResult {
    std::vector<Triple> triples;
    ValidationStats stats;
};

/// Score every query against both passages of its pair and keep it when
/// margin > tau. A query targeting B swaps the roles: B becomes the positive.
/// Throws ConfigError unless 0 < tau < 1, DataError for unknown pair ids.
ValidationResult validate(std::span<const GeneratedQuery> queries,
                          std::span<const PairContext> pairs, RelevanceScorer &scorer,
                          double tau = 0.15);

void write_triples(std::ostream &out, std::span<const Triple> triples);
std::vector<Triple> read_triples(std::istream &in);

/// query <TAB> positive text <TAB> negative text, valid triples only. Tabs
/// and newlines inside fields become spaces.
void write_triples_tsv(std::ostream &out, std::span<const Triple> triples);

} // namespace clirgen
