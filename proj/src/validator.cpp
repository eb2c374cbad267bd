#include "clirgen/validator.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "clirgen/errors.hpp"
#include "clirgen/text.hpp"

namespace clirgen {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

double LexicalScorer::score(std::string_view query, std::string_view passage) const
{
    auto q = text::analyze(query);
    auto p = text::analyze(passage);
    std::sort(q.begin(), q.end());
    q.erase(std::unique(q.begin(), q.end()), q.end());
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
    if (q.empty() || p.empty()) {
        return 0.0;
    }
    std::size_t common = 0;
    for (auto i = q.begin(), j = p.begin(); i != q.end() && j != p.end();) {
        if (*i < *j) {
            ++i;
        } else if (*j < *i) {
            ++j;
        } else {
            ++common;
            ++i;
            ++j;
        }
    }
    return temperature_ * static_cast<double>(common)
           / std::sqrt(static_cast<double>(q.size()) * static_cast<double>(p.size()));
}

std::vector<double> LexicalScorer::score_batch(std::span<const ScoreItem> items)
{
    std::vector<double> out(items.size());
    const auto n = static_cast<std::ptrdiff_t>(items.size());
#pragma omp parallel for schedule(dynamic, 32)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto &it = items[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = score(it.query, it.passage);
    }
    return out;
}

std::vector<double> LexicalScorer::score_batch_serial(std::span<const ScoreItem> items) const
{
    std::vector<double> out;
    out.reserve(items.size());
    for (const auto &it : items) {
        out.push_back(score(it.query, it.passage));
    }
    return out;
}

double margin(double score_pos, double score_neg)
{
    if (!std::isfinite(score_pos) || !std::isfinite(score_neg)) {
        throw std::domain_error("margin: non-finite score");
    }
    const double m = std::max(score_pos, score_neg);
    const double ep = std::exp(score_pos - m);
    const double en = std::exp(score_neg - m);
    return ep / (ep + en) - en / (ep + en);
}

double raw_score_threshold(double tau)
{
    return 2.0 * std::atanh(tau);
}

std::string_view to_string(RejectionReason r)
{
    switch (r) {
    case RejectionReason::margin_below_tau: return "margin_below_tau";
    case RejectionReason::inverted: return "inverted";
    case RejectionReason::scorer_error: return "scorer_error";
    }
    return "unknown";
}

namespace {

RejectionReason parse_rejection(std::string_view s)
{
    if (s == "margin_below_tau") {
        return RejectionReason::margin_below_tau;
    }
    if (s == "inverted") {
        return RejectionReason::inverted;
    }
    if (s == "scorer_error") {
        return RejectionReason::scorer_error;
    }
    throw DataError("unknown rejection reason: " + std::string(s));
}

} // namespace

ValidationResult validate(std::span<const GeneratedQuery> queries,
                          std::span<const PairContext> pairs, RelevanceScorer &scorer, double tau)
{
    if (!(tau > 0.0 && tau < 1.0)) {
        throw ConfigError("tau must be in (0, 1)");
    }
    std::unordered_map<std::string, const PairContext *> by_id;
    for (const auto &p : pairs) {
        by_id.emplace(p.pair_id, &p);
    }

    ValidationResult result;
    auto &stats = result.stats;
    stats.pair_count = by_id.size();
    result.triples.reserve(queries.size());

    std::unordered_map<std::string, std::size_t> per_pair_seq;
    std::vector<ScoreItem> items;
    items.reserve(2 * queries.size());
    for (const auto &q : queries) {
        auto it = by_id.find(q.pair_id);
        if (it == by_id.end()) {
            throw DataError("query references unknown pair " + q.pair_id);
        }
        const auto &ctx = *it->second;
        const bool a_positive = q.target == QueryTarget::A;
        Triple t;
        t.triple_id = q.pair_id + "-q" + std::to_string(per_pair_seq[q.pair_id]++);
        t.pair_id = q.pair_id;
        t.query = q.text;
        t.target = q.target;
        t.positive_id = a_positive ? ctx.first_id : ctx.second_id;
        t.negative_id = a_positive ? ctx.second_id : ctx.first_id;
        t.positive_text = a_positive ? ctx.first_text : ctx.second_text;
        t.negative_text = a_positive ? ctx.second_text : ctx.first_text;
        t.truncated = ctx.truncated;
        items.push_back({t.query, t.positive_text});
        items.push_back({t.query, t.negative_text});
        result.triples.push_back(std::move(t));
    }

    // Score in batches; a failing batch marks its triples as scorer errors.
    std::vector<double> scores(items.size(), std::nan(""));
    const auto limit = std::max<std::size_t>(2, scorer.batch_limit() & ~std::size_t{1});
    for (std::size_t start = 0; start < items.size(); start += limit) {
        const auto len = std::min(limit, items.size() - start);
        try {
            auto got = scorer.score_batch(std::span(items).subspan(start, len));
            if (got.size() != len) {
                continue;
            }
            std::copy(got.begin(), got.end(), scores.begin() + static_cast<std::ptrdiff_t>(start));
        } catch (const std::exception &) {
            // left as NaN
        }
    }

    std::unordered_map<std::string, std::size_t> valid_per_pair;
    for (const auto &p : by_id) {
        valid_per_pair[p.first] = 0;
    }
    for (std::size_t i = 0; i < result.triples.size(); ++i) {
        auto &t = result.triples[i];
        ++stats.generated_count;
        t.score_pos = scores[2 * i];
        t.score_neg = scores[2 * i + 1];
        try {
            t.margin = margin(t.score_pos, t.score_neg);
        } catch (const std::domain_error &) {
            t.margin = 0.0;
            t.valid = false;
            t.rejection = RejectionReason::scorer_error;
            ++stats.scorer_error_count;
            continue;
        }
        t.valid = t.margin > tau;
        if (t.valid) {
            ++stats.valid_count;
            ++valid_per_pair[t.pair_id];
        } else {
            ++stats.rejected_count;
            if (t.margin < 0.0) {
                t.rejection = RejectionReason::inverted;
                ++stats.inverted_count;
            } else {
                t.rejection = RejectionReason::margin_below_tau;
            }
        }
    }
    for (const auto &[id, n] : valid_per_pair) {
        ++stats.fanout_histogram[n];
    }
    return result;
}

namespace {

json finite_or_null(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

double number_or_nan(const json &j, const char *key)
{
    auto it = j.find(key);
    return (it == j.end() || it->is_null()) ? std::nan("") : it->get<double>();
}

std::string tsv_field(std::string s)
{
    std::replace_if(s.begin(), s.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; },
                    ' ');
    return s;
}

} // namespace

void write_triples(std::ostream &out, std::span<const Triple> triples)
{
    for (const auto &t : triples) {
        ojson j;
        j["triple_id"] = t.triple_id;
        j["pair_id"] = t.pair_id;
        j["query"] = t.query;
        j["target"] = to_string(t.target);
        j["positive_id"] = t.positive_id;
        j["negative_id"] = t.negative_id;
        j["score_pos"] = finite_or_null(t.score_pos);
        j["score_neg"] = finite_or_null(t.score_neg);
        j["margin"] = t.margin;
        j["valid"] = t.valid;
        j["rejection_reason"] = t.rejection ? ojson(to_string(*t.rejection)) : ojson(nullptr);
        j["truncated"] = t.truncated;
        j["positive_text"] = t.positive_text;
        j["negative_text"] = t.negative_text;
        out << j.dump() << '\n';
    }
    if (!out) {
        throw IoError("failed to write triples");
    }
}

std::vector<Triple> read_triples(std::istream &in)
{
    std::vector<Triple> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        try {
            auto j = json::parse(line);
            Triple t;
            t.triple_id = j.at("triple_id").get<std::string>();
            t.pair_id = j.at("pair_id").get<std::string>();
            t.query = j.at("query").get<std::string>();
            t.target = parse_query_target(j.at("target").get<std::string>());
            t.positive_id = j.at("positive_id").get<std::string>();
            t.negative_id = j.at("negative_id").get<std::string>();
            t.score_pos = number_or_nan(j, "score_pos");
            t.score_neg = number_or_nan(j, "score_neg");
            t.margin = j.at("margin").get<double>();
            t.valid = j.at("valid").get<bool>();
            if (j.contains("rejection_reason") && !j["rejection_reason"].is_null()) {
                t.rejection = parse_rejection(j["rejection_reason"].get<std::string>());
            }
            t.truncated = j.value("truncated", false);
            t.positive_text = j.at("positive_text").get<std::string>();
            t.negative_text = j.at("negative_text").get<std::string>();
            out.push_back(std::move(t));
        } catch (const json::exception &e) {
            throw DataError("triples line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_triples_tsv(std::ostream &out, std::span<const Triple> triples)
{
    for (const auto &t : triples) {
        if (!t.valid) {
            continue;
        }
        out << tsv_field(t.query) << '\t' << tsv_field(t.positive_text) << '\t'
            << tsv_field(t.negative_text) << '\n';
    }
    if (!out) {
        throw IoError("failed to write triples tsv");
    }
}

} // namespace clirgen
