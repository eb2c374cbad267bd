#include "clirgen/prompt.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <regex>

#include <json.hpp>

#include "clirgen/errors.hpp"
#include "clirgen/text.hpp"

namespace clirgen {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::string_view kFirstSlot = "{first}";
constexpr std::string_view kSecondSlot = "{second}";

constexpr std::string_view kStandardBody =
    "This is document A: <<{first}>>\n"
    "This is document B: <<{second}>>\n"
    "\n"
    "I am an analyst writing a report. Only one of the documents will help me write my report.  "
    "For each\n"
    "document, describe in English, one per line, five things my report might be about for which "
    "that\n"
    "document will help me write my report and the other document will not help me write my "
    "report.";

constexpr std::string_view kTweetAddition =
    "No response should require the recipient to have seen the previous responses.";

std::size_t count_occurrences(std::string_view hay, std::string_view needle)
{
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string_view::npos;
         pos = hay.find(needle, pos + needle.size())) {
        ++n;
    }
    return n;
}

/// Longest prefix of `text`, cut at a token boundary, whose estimate fits.
std::string truncate_to(std::string_view text, std::size_t max_tokens, const TokenEstimator &est)
{
    auto cps = text::decode_utf8(text);
    auto spans = text::tokenize_spans(cps);
    auto prefix = [&](std::size_t ntok) {
        if (ntok == 0) {
            return std::string();
        }
        return text::encode_utf8(std::u32string_view(cps).substr(0, spans[ntok - 1].end));
    };
    std::size_t lo = 0;
    std::size_t hi = spans.size();
    while (lo < hi) {
        const std::size_t mid = (lo + hi + 1) / 2;
        if (est(prefix(mid)) <= max_tokens) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    return prefix(lo);
}

} // namespace

PromptTemplate PromptTemplate::standard()
{
    PromptTemplate t;
    t.body = std::string(kStandardBody);
    t.tweet_addition = std::string(kTweetAddition);
    return t;
}

PromptTemplate PromptTemplate::from_text(std::string body)
{
    PromptTemplate t = standard();
    t.body = std::move(body);
    t.validate();
    return t;
}

void PromptTemplate::validate() const
{
    if (count_occurrences(body, kFirstSlot) != 1 || count_occurrences(body, kSecondSlot) != 1) {
        throw ConfigError("prompt template must contain {first} and {second} exactly once each");
    }
    if (queries_per_side == 0) {
        throw ConfigError("queries_per_side must be >= 1");
    }
}

std::size_t estimate_tokens(std::string_view utf8)
{
    std::size_t cjk = 0;
    std::size_t latin = 0;
    std::size_t other = 0;
    for (char32_t c : text::decode_utf8(utf8)) {
        if (text::is_cjk(c)) {
            ++cjk;
        } else if (c < 0x0250) {
            ++latin;
        } else {
            ++other;
        }
    }
    // In quarter tokens, then * 1.1 rounded up, all in integers so exact
    // multiples do not pick up a spurious extra token.
    const std::size_t quarters = 4 * (cjk + other) + latin;
    return (quarters * 11 + 39) / 40;
}

std::size_t TokenBudget::prompt_limit() const
{
    if (reserved_output_tokens >= model_input_limit) {
        throw ConfigError("reserved output tokens exceed the model input limit");
    }
    return model_input_limit - reserved_output_tokens;
}

std::string fill_template(const PromptTemplate &tmpl, std::string_view first,
                          std::string_view second, bool tweet)
{
    std::string body = tmpl.body;
    if (tweet && tmpl.tweet_addition) {
        // The addition joins the instruction, ahead of any trailing newlines.
        auto end = body.find_last_not_of("\r\n");
        auto insert_at = end == std::string::npos ? body.size() : end + 1;
        body.insert(insert_at, " " + *tmpl.tweet_addition);
    }
    // Substitute the later slot first so the earlier one's position holds
    // even if a passage contains slot text.
    const auto p1 = body.find(kFirstSlot);
    const auto p2 = body.find(kSecondSlot);
    if (p1 < p2) {
        body.replace(p2, kSecondSlot.size(), second);
        body.replace(p1, kFirstSlot.size(), first);
    } else {
        body.replace(p1, kFirstSlot.size(), first);
        body.replace(p2, kSecondSlot.size(), second);
    }
    return body;
}

RenderedPrompt render(const PassagePair &pair, const PromptTemplate &tmpl,
                      const TokenBudget &budget)
{
    tmpl.validate();
    if (pair.positive.text.empty() || pair.negative.text.empty()) {
        throw DataError("pair " + pair.pair_id + " has an empty passage");
    }
    const bool tweet = pair.mode == PairingMode::tweet || pair.positive.genre == Genre::tweet_thread;
    const auto &est = budget.estimator;
    const auto limit = budget.prompt_limit();

    RenderedPrompt out;
    out.pair_id = pair.pair_id;
    out.tweet = tweet;
    out.first_text = pair.positive.text;
    out.second_text = pair.negative.text;
    out.prompt = fill_template(tmpl, out.first_text, out.second_text, tweet);
    out.estimated_tokens = est(out.prompt);
    if (out.estimated_tokens <= limit) {
        return out;
    }

    const auto overhead = std::max(est(fill_template(tmpl, "", "", tweet)),
                                   budget.prompt_overhead_tokens);
    const auto est_a = est(pair.positive.text);
    const auto est_b = est(pair.negative.text);
    if (overhead >= limit) {
        throw BudgetError("template alone exceeds the prompt budget");
    }
    double scale = static_cast<double>(limit - overhead) / static_cast<double>(est_a + est_b);
    for (int iter = 0; iter < 64; ++iter) {
        const auto target_a = static_cast<std::size_t>(std::floor(est_a * scale));
        const auto target_b = static_cast<std::size_t>(std::floor(est_b * scale));
        if (target_a < budget.min_tokens_per_passage || target_b < budget.min_tokens_per_passage) {
            throw BudgetError("pair " + pair.pair_id
                              + " cannot fit the token budget without cutting a passage below "
                              + std::to_string(budget.min_tokens_per_passage) + " tokens");
        }
        out.first_text = truncate_to(pair.positive.text, target_a, est);
        out.second_text = truncate_to(pair.negative.text, target_b, est);
        out.prompt = fill_template(tmpl, out.first_text, out.second_text, tweet);
        out.estimated_tokens = est(out.prompt);
        if (out.estimated_tokens <= limit) {
            if (out.first_text.empty() || out.second_text.empty()) {
                throw BudgetError("pair " + pair.pair_id + " truncated to an empty passage");
            }
            out.truncated = true;
            return out;
        }
        scale *= 0.95;
    }
    throw BudgetError("pair " + pair.pair_id + " did not converge to the token budget");
}

std::string_view to_string(QueryTarget t)
{
    return t == QueryTarget::A ? "A" : "B";
}

QueryTarget parse_query_target(std::string_view s)
{
    if (s == "A" || s == "a") {
        return QueryTarget::A;
    }
    if (s == "B" || s == "b") {
        return QueryTarget::B;
    }
    throw DataError("bad query target: " + std::string(s));
}

std::string_view to_string(ParseWarningKind k)
{
    switch (k) {
    case ParseWarningKind::empty_response: return "empty_response";
    case ParseWarningKind::refusal: return "refusal";
    case ParseWarningKind::no_headers: return "no_headers";
    case ParseWarningKind::preamble_ignored: return "preamble_ignored";
    case ParseWarningKind::short_line_dropped: return "short_line_dropped";
    case ParseWarningKind::count_mismatch: return "count_mismatch";
    case ParseWarningKind::capped: return "capped";
    }
    return "unknown";
}

namespace {

bool is_bullet(char32_t c)
{
    switch (c) {
    case U'-': case U'*': case U'+': case U'>': case 0x2022: case 0x00B7: case 0x2013:
    case 0x2014: case 0x25AA: case 0x25CF: case 0x2023:
        return true;
    default:
        return false;
    }
}

bool is_quote(char32_t c)
{
    switch (c) {
    case U'"': case U'\'': case U'`': case 0x201C: case 0x201D: case 0x2018: case 0x2019:
    case 0x00AB: case 0x00BB: case 0x201E:
        return true;
    default:
        return false;
    }
}

bool is_digit(char32_t c)
{
    return c >= U'0' && c <= U'9';
}

std::u32string_view trim_spaces(std::u32string_view s)
{
    while (!s.empty() && text::is_space(s.front())) {
        s.remove_prefix(1);
    }
    while (!s.empty() && text::is_space(s.back())) {
        s.remove_suffix(1);
    }
    return s;
}

std::size_t word_count(std::string_view s)
{
    return text::tokenize_spans(text::decode_utf8(s)).size();
}

enum class LineKind { header, content };

struct ClassifiedLine {
    LineKind kind = LineKind::content;
    QueryTarget target = QueryTarget::A;
    std::string remainder; // header text after the label, if any
};

ClassifiedLine classify(std::string_view line)
{
    static const std::regex long_form(
        R"(^(?:for |from |in |about )?(?:the )?(?:document|doc|passage|text)\s*([ab])(?![a-z0-9])\s*[:.)\-]*\s*(.*)$)");
    static const std::regex short_form(R"(^\(?([ab])\)?\s*:\s*(.*)$)");

    // Headers are often decorated as markdown.
    auto s = text::trim(line);
    auto strip_decor = [](std::string &x) {
        auto b = x.find_first_not_of("*#_ ");
        auto e = x.find_last_not_of("*#_ ");
        x = b == std::string::npos ? std::string() : x.substr(b, e - b + 1);
    };
    strip_decor(s);
    std::string lower = s;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) {
        return static_cast<char>(c < 0x80 ? std::tolower(c) : c);
    });
    std::smatch m;
    if (std::regex_match(lower, m, long_form) || std::regex_match(lower, m, short_form)) {
        ClassifiedLine out;
        out.kind = LineKind::header;
        out.target = m[1].str() == "a" ? QueryTarget::A : QueryTarget::B;
        out.remainder = s.substr(static_cast<std::size_t>(m.position(2)));
        strip_decor(out.remainder);
        return out;
    }
    return {};
}

bool looks_like_refusal(std::string_view response)
{
    static const char *patterns[] = {"i cannot", "i can't", "i can not", "i'm sorry", "i am sorry",
                                     "as an ai", "i am unable", "i'm unable", "i won't"};
    std::string lower(response);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) {
        return static_cast<char>(c < 0x80 ? std::tolower(c) : c);
    });
    return std::any_of(std::begin(patterns), std::end(patterns),
                       [&](const char *p) { return lower.find(p) != std::string::npos; });
}

} // namespace

std::string clean_query_line(std::string_view line)
{
    auto cps = text::decode_utf8(line);
    std::u32string_view s = trim_spaces(cps);
    bool changed = true;
    while (changed && !s.empty()) {
        changed = false;
        // A leading "**" opens emphasis, not a bullet.
        while (!s.empty() && (is_bullet(s.front()) || text::is_space(s.front()))
               && !(s.size() >= 2 && s[0] == U'*' && s[1] == U'*')) {
            s.remove_prefix(1);
            changed = true;
        }
        // "1." "1)" "(1)" "12:" numbering
        std::size_t i = 0;
        const bool paren = !s.empty() && s.front() == U'(';
        if (paren) {
            ++i;
        }
        std::size_t digits = 0;
        while (i < s.size() && is_digit(s[i])) {
            ++i;
            ++digits;
        }
        if (digits > 0 && i < s.size() && (s[i] == U'.' || s[i] == U')' || s[i] == U':')) {
            s.remove_prefix(i + 1);
            changed = true;
        } else if (digits > 0 && paren && i < s.size() && s[i] == U')') {
            s.remove_prefix(i + 1);
            changed = true;
        }
        s = trim_spaces(s);
        while (s.size() >= 2 && s.front() == U'*' && s.back() == U'*') {
            s.remove_prefix(1);
            s.remove_suffix(1);
            changed = true;
        }
        if (s.size() >= 2 && is_quote(s.front()) && is_quote(s.back())) {
            s.remove_prefix(1);
            s.remove_suffix(1);
            s = trim_spaces(s);
            changed = true;
        }
    }
    return text::encode_utf8(s);
}

ParseResult parse_response(std::string_view pair_id, std::string_view response,
                           std::size_t queries_per_side)
{
    ParseResult result;
    auto warn = [&](ParseWarningKind k, std::string detail) {
        result.warnings.push_back({k, std::move(detail)});
    };

    std::vector<std::string> lines;
    {
        std::size_t start = 0;
        while (start <= response.size()) {
            auto end = response.find('\n', start);
            if (end == std::string_view::npos) {
                end = response.size();
            }
            auto l = text::trim(response.substr(start, end - start));
            if (!l.empty()) {
                lines.push_back(std::move(l));
            }
            start = end + 1;
        }
    }
    if (lines.empty()) {
        warn(ParseWarningKind::empty_response, "response has no non-empty lines");
        return result;
    }

    struct Candidate {
        QueryTarget target;
        std::string raw;
    };
    std::vector<Candidate> candidates;

    bool any_header = false;
    std::optional<QueryTarget> current;
    std::size_t preamble = 0;
    for (const auto &line : lines) {
        auto c = classify(line);
        if (c.kind == LineKind::header) {
            any_header = true;
            current = c.target;
            if (!c.remainder.empty() && c.remainder.back() != ':') {
                candidates.push_back({c.target, c.remainder});
            }
        } else if (current) {
            candidates.push_back({*current, line});
        } else {
            ++preamble;
        }
    }

    if (!any_header) {
        if (looks_like_refusal(response)) {
            warn(ParseWarningKind::refusal, "response reads as a refusal");
            return result;
        }
        if (lines.size() < 2) {
            warn(ParseWarningKind::no_headers, "single headerless line; nothing to split");
            return result;
        }
        warn(ParseWarningKind::no_headers,
             "no document headers; splitting " + std::to_string(lines.size()) + " lines in half");
        const auto half = (lines.size() + 1) / 2;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            candidates.push_back({i < half ? QueryTarget::A : QueryTarget::B, lines[i]});
        }
    } else if (preamble > 0) {
        warn(ParseWarningKind::preamble_ignored,
             std::to_string(preamble) + " line(s) before the first header ignored");
    }

    std::vector<GeneratedQuery> side_a;
    std::vector<GeneratedQuery> side_b;
    for (auto &c : candidates) {
        auto cleaned = clean_query_line(c.raw);
        if (word_count(cleaned) < 3) {
            warn(ParseWarningKind::short_line_dropped, "dropped: " + c.raw);
            continue;
        }
        GeneratedQuery q{std::string(pair_id), c.target, std::move(cleaned), std::move(c.raw)};
        (c.target == QueryTarget::A ? side_a : side_b).push_back(std::move(q));
    }

    if (side_a.size() != queries_per_side || side_b.size() != queries_per_side) {
        warn(ParseWarningKind::count_mismatch,
             "expected " + std::to_string(queries_per_side) + " per side, got A="
                 + std::to_string(side_a.size()) + " B=" + std::to_string(side_b.size()));
    }

    const auto cap = 2 * queries_per_side;
    if (side_a.size() + side_b.size() > cap) {
        while (side_a.size() + side_b.size() > cap) {
            (side_a.size() >= side_b.size() ? side_a : side_b).pop_back();
        }
        warn(ParseWarningKind::capped, "retained queries capped at " + std::to_string(cap));
    }

    result.queries = std::move(side_a);
    std::move(side_b.begin(), side_b.end(), std::back_inserter(result.queries));
    return result;
}

void write_prompts(std::ostream &out, const std::vector<RenderedPrompt> &prompts)
{
    for (const auto &p : prompts) {
        ojson j;
        j["pair_id"] = p.pair_id;
        j["truncated"] = p.truncated;
        j["tweet"] = p.tweet;
        j["estimated_tokens"] = p.estimated_tokens;
        j["first_text"] = p.first_text;
        j["second_text"] = p.second_text;
        j["prompt"] = p.prompt;
        out << j.dump() << '\n';
    }
    if (!out) {
        throw IoError("failed to write prompts");
    }
}

std::vector<RenderedPrompt> read_prompts(std::istream &in)
{
    std::vector<RenderedPrompt> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        try {
            auto j = json::parse(line);
            RenderedPrompt p;
            p.pair_id = j.at("pair_id").get<std::string>();
            p.truncated = j.value("truncated", false);
            p.tweet = j.value("tweet", false);
            p.estimated_tokens = j.value("estimated_tokens", std::size_t{0});
            p.first_text = j.at("first_text").get<std::string>();
            p.second_text = j.at("second_text").get<std::string>();
            p.prompt = j.at("prompt").get<std::string>();
            out.push_back(std::move(p));
        } catch (const json::exception &e) {
            throw DataError("prompts line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

} // namespace clirgen
