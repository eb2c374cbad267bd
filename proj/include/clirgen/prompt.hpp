#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "clirgen/pair_miner.hpp"

namespace clirgen {

struct PromptTemplate {
    std::string body; // exactly one {first} and one {second}
    std::optional<std::string> tweet_addition;
    std::size_t queries_per_side = 5;

    /// The zero-shot two-document template used for every run unless
    /// overridden, with the tweet addition set.
    static PromptTemplate standard();

    /// Load a template body from a file's text; keeps the standard tweet
    /// addition. Throws ConfigError if the slots are not each present once.
    static PromptTemplate from_text(std::string body);

    void validate() const;
};

using TokenEstimator = std::function<std::size_t(std::string_view)>;

/// Default estimator: one token per CJK code point, four Latin-script code
/// points per token, one token per code point of any other script, plus a
/// 10% safety margin (rounded up).
std::size_t estimate_tokens(std::string_view utf8);

struct TokenBudget {
    std::size_t model_input_limit = 4000;
    std::size_t reserved_output_tokens = 512;
    std::size_t prompt_overhead_tokens = 100; // lower bound on template cost
    std::size_t min_tokens_per_passage = 20;
    TokenEstimator estimator = estimate_tokens;

    std::size_t prompt_limit() const;
};

struct BudgetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RenderedPrompt {
    std::string pair_id;
    std::string prompt;
    std::string first_text; // text substituted for {first}, possibly truncated
    std::string second_text;
    bool truncated = false;
    bool tweet = false;
    std::size_t estimated_tokens = 0;
};

/// Substitute the pair's positive as document A and negative as document B.
/// Over-budget passages are cut back proportionally at token boundaries.
/// Throws BudgetError when either passage would keep fewer than
/// `budget.min_tokens_per_passage` tokens, DataError on empty passages.
RenderedPrompt render(const PassagePair &pair, const PromptTemplate &tmpl,
                      const TokenBudget &budget = {});

/// Plain slot substitution with no budget logic.
std::string fill_template(const PromptTemplate &tmpl, std::string_view first,
                          std::string_view second, bool tweet);

enum class QueryTarget { A, B };

std::string_view to_string(QueryTarget t);
QueryTarget parse_query_target(std::string_view s);

struct GeneratedQuery {
    std::string pair_id;
    QueryTarget target = QueryTarget::A;
    std::string text;
    std::string raw_line;
};

enum class ParseWarningKind {
    empty_response,
    refusal,
    no_headers,
    preamble_ignored,
    short_line_dropped,
    count_mismatch,
    capped,
};

std::string_view to_string(ParseWarningKind k);

struct ParseWarning {
    ParseWarningKind kind;
    std::string detail;
};

struct ParseResult {
    std::vector<GeneratedQuery> queries;
    std::vector<ParseWarning> warnings;
};

/// Split a free-text response into document A and B queries. Never throws on
/// malformed input; anomalies become warnings.
ParseResult parse_response(std::string_view pair_id, std::string_view response,
                           std::size_t queries_per_side = 5);

/// Strip list bullets, numbering and surrounding quotes from one line.
std::string clean_query_line(std::string_view line);

void write_prompts(std::ostream &out, const std::vector<RenderedPrompt> &prompts);
std::vector<RenderedPrompt> read_prompts(std::istream &in);

} // namespace clirgen
