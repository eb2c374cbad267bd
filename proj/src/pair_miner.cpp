#include "clirgen/pair_miner.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "clirgen/errors.hpp"
#include "clirgen/lcs.hpp"
#include "clirgen/text.hpp"

namespace clirgen {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string_view to_string(PairingMode m)
{
    return m == PairingMode::news ? "news" : "tweet";
}

PairingMode parse_pairing_mode(std::string_view s)
{
    if (s == "news") {
        return PairingMode::news;
    }
    if (s == "tweet" || s == "tweet_thread") {
        return PairingMode::tweet;
    }
    throw ConfigError("unknown pairing mode: " + std::string(s));
}

PairingConfig PairingConfig::news_defaults()
{
    PairingConfig c;
    c.mode = PairingMode::news;
    c.min_passage_chars = {{"zho", 75}, {"fas", 100}, {"rus", 200}};
    c.ratio_threshold = 0.65;
    c.exclude_same_document = true;
    c.unique_pairing = false;
    return c;
}

PairingConfig PairingConfig::tweet_defaults()
{
    PairingConfig c;
    c.mode = PairingMode::tweet;
    c.min_passage_chars = {{"zho", 15}, {"fas", 25}};
    c.ratio_threshold = 0.8;
    c.exclude_same_document = false;
    c.unique_pairing = true;
    return c;
}

std::size_t PairingConfig::min_chars_for(std::string_view lang) const
{
    if (auto it = min_passage_chars.find(std::string(lang)); it != min_passage_chars.end()) {
        return it->second;
    }
    if (auto it = min_passage_chars.find("*"); it != min_passage_chars.end()) {
        return it->second;
    }
    throw ConfigError("no minimum passage length configured for language '" + std::string(lang)
                      + "'");
}

void PairingConfig::validate() const
{
    if (!(ratio_threshold > 0.0 && ratio_threshold < 1.0)) {
        throw ConfigError("ratio_threshold must be in (0, 1)");
    }
    if (!(lcs_min_outside_frac >= 0.0 && lcs_min_outside_frac <= 1.0)) {
        throw ConfigError("lcs_min_outside_frac must be in [0, 1]");
    }
    if (candidate_pool_size == 0) {
        throw ConfigError("candidate_pool_size must be >= 1");
    }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream)
{
    // splitmix64 over the combined value
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

/// Uniform draw in [0, n) by rejection, identical on every standard library.
std::uint64_t uniform_index(std::uint64_t seed, std::uint64_t n)
{
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = mix_seed(seed, 0);
    for (std::uint64_t i = 1; x >= limit; ++i) {
        x = mix_seed(seed, i);
    }
    return x % n;
}

std::string make_pair_id(std::size_t n)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "pair-%06zu", n);
    return buf;
}

} // namespace

std::optional<std::size_t> select_news_negative(std::span<const RankedCandidate> ranked,
                                                double self_score, std::string_view positive_doc,
                                                double ratio_threshold)
{
    if (!(self_score > 0.0)) {
        return std::nullopt;
    }
    std::unordered_set<std::string_view> disqualified;
    for (const auto &c : ranked) {
        if (c.score / self_score >= ratio_threshold) {
            disqualified.insert(c.doc_id);
        }
    }
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const auto &c = ranked[i];
        if (c.doc_id == positive_doc || c.char_len < c.min_chars) {
            continue;
        }
        if (c.score / self_score >= ratio_threshold || disqualified.contains(c.doc_id)) {
            continue;
        }
        return i;
    }
    return std::nullopt;
}

bool passes_lcs_gate(std::size_t len_a, std::size_t len_b, std::size_t lcs_len,
                     std::size_t min_chars, double min_frac)
{
    auto ok = [&](std::size_t len) {
        if (len < lcs_len || len == 0) {
            return false;
        }
        const auto outside = len - lcs_len;
        return outside >= min_chars
               && static_cast<double>(outside) >= min_frac * static_cast<double>(len);
    };
    return ok(len_a) && ok(len_b);
}

NewsMiner::NewsMiner(std::span<const Passage> passages, const Bm25Index &index, PairingConfig cfg)
    : passages_(passages), index_(index), cfg_(std::move(cfg))
{
    cfg_.validate();
    if (cfg_.mode != PairingMode::news) {
        throw ConfigError("NewsMiner requires mode=news");
    }
    if (passages_.size() != index_.passage_count()) {
        throw DataError("passage store and index disagree on passage count");
    }
    for (std::uint32_t i = 0; i < passages_.size(); ++i) {
        if (passages_[i].passage_id != index_.passage_id(i)) {
            throw DataError("passage store and index disagree at " + passages_[i].passage_id);
        }
        if (passages_[i].char_len >= cfg_.min_chars_for(passages_[i].lang)) {
            eligible_.push_back(i);
        }
    }
}

std::optional<PassagePair> NewsMiner::mine_one(std::uint64_t rng_seed, NoPairReason *why) const
{
    auto fail = [&](NoPairReason r) -> std::optional<PassagePair> {
        if (why != nullptr) {
            *why = r;
        }
        return std::nullopt;
    };
    if (eligible_.empty()) {
        return fail(NoPairReason::no_eligible_positive);
    }
    const auto pos_ord = eligible_[uniform_index(rng_seed, eligible_.size())];
    const auto &pos = passages_[pos_ord];
    const double self_score = index_.score(pos.text, pos_ord);
    if (!(self_score > 0.0)) {
        return fail(NoPairReason::degenerate_positive);
    }
    auto hits = index_.search(pos.text, cfg_.candidate_pool_size);
    std::vector<RankedCandidate> ranked;
    ranked.reserve(hits.size());
    for (const auto &h : hits) {
        const auto &p = passages_[h.ordinal];
        ranked.push_back({p.doc_id, p.char_len, cfg_.min_chars_for(p.lang), h.score});
    }
    auto chosen = select_news_negative(ranked, self_score, pos.doc_id, cfg_.ratio_threshold);
    if (!chosen) {
        return fail(NoPairReason::no_qualifying_negative);
    }
    const auto &hit = hits[*chosen];
    PassagePair pair;
    pair.mode = PairingMode::news;
    pair.positive = pos;
    pair.negative = passages_[hit.ordinal];
    pair.positive_self_score = self_score;
    pair.negative_score = hit.score;
    pair.score_ratio = hit.score / self_score;
    if (why != nullptr) {
        *why = NoPairReason::none;
    }
    return pair;
}

namespace {

void record_failure(MiningStats &stats, NoPairReason why)
{
    switch (why) {
    case NoPairReason::degenerate_positive:
        ++stats.degenerate_positive;
        break;
    case NoPairReason::no_qualifying_negative:
    case NoPairReason::no_eligible_positive:
        ++stats.no_qualifying_negative;
        break;
    case NoPairReason::none:
        break;
    }
}

struct Acceptor {
    NewsMiner::Result result;
    std::unordered_set<std::string> used_positives;

    /// Returns true once `count` pairs have been accepted.
    bool offer(std::optional<PassagePair> &&pair, NoPairReason why, std::size_t count)
    {
        ++result.stats.attempts;
        if (!pair) {
            record_failure(result.stats, why);
        } else if (!used_positives.insert(pair->positive.passage_id).second) {
            ++result.stats.repeated_positive;
        } else {
            pair->pair_id = make_pair_id(result.pairs.size());
            result.pairs.push_back(std::move(*pair));
            ++result.stats.pairs;
        }
        return result.pairs.size() >= count;
    }
};

} // namespace

NewsMiner::Result NewsMiner::mine(std::size_t count, std::uint64_t seed,
                                  std::size_t max_attempts) const
{
    if (max_attempts == 0) {
        max_attempts = 20 * count + 100;
    }
    Acceptor acc;
    if (count == 0) {
        return std::move(acc.result);
    }
    std::size_t next = 0;
    while (next < max_attempts) {
        const std::size_t remaining = count - acc.result.pairs.size();
        const std::size_t block = std::min(max_attempts - next, std::max<std::size_t>(64, remaining + remaining / 4));
        std::vector<std::optional<PassagePair>> tries(block);
        std::vector<NoPairReason> reasons(block, NoPairReason::none);
        const auto n = static_cast<std::ptrdiff_t>(block);
#pragma omp parallel for schedule(dynamic, 1)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(i);
            tries[k] = mine_one(mix_seed(seed, next + k), &reasons[k]);
        }
        for (std::size_t i = 0; i < block; ++i) {
            if (acc.offer(std::move(tries[i]), reasons[i], count)) {
                return std::move(acc.result);
            }
        }
        next += block;
    }
    return std::move(acc.result);
}

NewsMiner::Result NewsMiner::mine_serial(std::size_t count, std::uint64_t seed,
                                         std::size_t max_attempts) const
{
    if (max_attempts == 0) {
        max_attempts = 20 * count + 100;
    }
    Acceptor acc;
    if (count == 0) {
        return std::move(acc.result);
    }
    for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
        NoPairReason why = NoPairReason::none;
        auto pair = mine_one(mix_seed(seed, attempt), &why);
        if (acc.offer(std::move(pair), why, count)) {
            break;
        }
    }
    return std::move(acc.result);
}

TweetMiningResult mine_tweet_pairs(std::span<const Passage> passages, const Bm25Index &index,
                                   std::span<const SeedQuery> seeds, const PairingConfig &cfg)
{
    cfg.validate();
    if (cfg.mode != PairingMode::tweet) {
        throw ConfigError("mine_tweet_pairs requires mode=tweet");
    }
    if (seeds.empty()) {
        throw ConfigError("tweet mining needs at least one seed query");
    }
    if (passages.size() != index.passage_count()) {
        throw DataError("passage store and index disagree on passage count");
    }

    std::vector<std::string> seed_texts;
    seed_texts.reserve(seeds.size());
    for (const auto &s : seeds) {
        seed_texts.push_back(s.text);
    }
    const auto seed_hits = index.search_batch(seed_texts, cfg.candidate_pool_size);

    std::vector<std::u32string> decoded(passages.size());
    auto cps = [&](std::uint32_t ord) -> const std::u32string & {
        if (decoded[ord].empty()) {
            decoded[ord] = text::decode_utf8(passages[ord].text);
        }
        return decoded[ord];
    };
    auto long_enough = [&](std::uint32_t ord) {
        return passages[ord].char_len >= cfg.min_chars_for(passages[ord].lang);
    };

    TweetMiningResult out;
    std::unordered_set<std::uint32_t> used; // single reservation point for both roles
    for (std::size_t si = 0; si < seeds.size(); ++si) {
        ++out.stats.attempts;
        const auto &hits_q = seed_hits[si];
        if (hits_q.empty()) {
            ++out.stats.seeds_no_hits;
            continue;
        }
        std::optional<std::uint32_t> pos_ord;
        for (const auto &h : hits_q) {
            if (long_enough(h.ordinal) && !used.contains(h.ordinal)) {
                pos_ord = h.ordinal;
                break;
            }
        }
        if (!pos_ord) {
            ++out.stats.seeds_no_positive;
            continue;
        }
        const auto &pos = passages[*pos_ord];
        const double self_score = index.score(pos.text, *pos_ord);
        if (!(self_score > 0.0)) {
            ++out.stats.degenerate_positive;
            continue;
        }
        std::unordered_set<std::uint32_t> in_seed_list;
        for (const auto &h : hits_q) {
            in_seed_list.insert(h.ordinal);
        }
        const auto hits_p = index.search(pos.text, cfg.candidate_pool_size);
        bool found = false;
        for (const auto &h : hits_p) {
            const auto ord = h.ordinal;
            if (ord == *pos_ord || used.contains(ord) || !in_seed_list.contains(ord)
                || !long_enough(ord)) {
                continue;
            }
            if (cfg.exclude_same_document && passages[ord].doc_id == pos.doc_id) {
                continue;
            }
            const double ratio = h.score / self_score;
            if (ratio >= cfg.ratio_threshold) {
                continue;
            }
            const auto lcs = longest_common_substring(cps(*pos_ord), cps(ord));
            if (!passes_lcs_gate(pos.char_len, passages[ord].char_len, lcs,
                                 cfg.lcs_min_outside_chars, cfg.lcs_min_outside_frac)) {
                continue;
            }
            PassagePair pair;
            pair.pair_id = make_pair_id(out.pairs.size());
            pair.mode = PairingMode::tweet;
            pair.positive = pos;
            pair.negative = passages[ord];
            pair.positive_self_score = self_score;
            pair.negative_score = h.score;
            pair.score_ratio = ratio;
            pair.lcs_len = lcs;
            pair.seed_query_id = seeds[si].id;
            if (cfg.unique_pairing) {
                used.insert(*pos_ord);
                used.insert(ord);
            }
            out.pairs.push_back(std::move(pair));
            ++out.stats.pairs;
            found = true;
            break;
        }
        if (!found) {
            ++out.stats.seeds_no_negative;
        }
    }
    return out;
}

namespace {

ojson passage_to_json(const Passage &p)
{
    ojson j;
    j["passage_id"] = p.passage_id;
    j["doc_id"] = p.doc_id;
    j["lang"] = p.lang;
    j["genre"] = to_string(p.genre);
    j["ordinal"] = p.ordinal;
    j["char_offset"] = p.char_offset;
    j["char_len"] = p.char_len;
    j["token_count"] = p.token_count;
    j["text"] = p.text;
    return j;
}

Passage passage_from_json(const json &j)
{
    Passage p;
    p.passage_id = j.at("passage_id").get<std::string>();
    p.doc_id = j.at("doc_id").get<std::string>();
    p.lang = j.value("lang", "");
    p.genre = parse_genre(j.value("genre", "news"));
    p.ordinal = j.value("ordinal", std::size_t{0});
    p.char_offset = j.value("char_offset", std::size_t{0});
    p.text = j.at("text").get<std::string>();
    p.char_len = text::code_point_length(p.text);
    p.token_count = j.value("token_count", std::size_t{0});
    return p;
}

} // namespace

void write_pairs(std::ostream &out, std::span<const PassagePair> pairs)
{
    for (const auto &p : pairs) {
        ojson j;
        j["pair_id"] = p.pair_id;
        j["mode"] = to_string(p.mode);
        j["positive_self_score"] = p.positive_self_score;
        j["negative_score"] = p.negative_score;
        j["score_ratio"] = p.score_ratio;
        j["lcs_len"] = p.lcs_len ? ojson(*p.lcs_len) : ojson(nullptr);
        j["seed_query_id"] = p.seed_query_id ? ojson(*p.seed_query_id) : ojson(nullptr);
        j["positive"] = passage_to_json(p.positive);
        j["negative"] = passage_to_json(p.negative);
        out << j.dump() << '\n';
    }
    if (!out) {
        throw IoError("failed to write pairs");
    }
}

std::vector<PassagePair> read_pairs(std::istream &in)
{
    std::vector<PassagePair> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        try {
            auto j = json::parse(line);
            PassagePair p;
            p.pair_id = j.at("pair_id").get<std::string>();
            p.mode = parse_pairing_mode(j.at("mode").get<std::string>());
            p.positive_self_score = j.at("positive_self_score").get<double>();
            p.negative_score = j.at("negative_score").get<double>();
            p.score_ratio = j.at("score_ratio").get<double>();
            if (j.contains("lcs_len") && !j["lcs_len"].is_null()) {
                p.lcs_len = j["lcs_len"].get<std::size_t>();
            }
            if (j.contains("seed_query_id") && !j["seed_query_id"].is_null()) {
                p.seed_query_id = j["seed_query_id"].get<std::string>();
            }
            p.positive = passage_from_json(j.at("positive"));
            p.negative = passage_from_json(j.at("negative"));
            out.push_back(std::move(p));
        } catch (const json::exception &e) {
            throw DataError("pairs line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<SeedQuery> read_seed_queries(std::istream &in)
{
    std::vector<SeedQuery> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (text::trim(line).empty()) {
            continue;
        }
        if (line.front() == '{') {
            auto j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("id") || !j.contains("text")) {
                throw DataError("seed queries line " + std::to_string(lineno) + ": malformed");
            }
            out.push_back({j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump(),
                           j["text"].get<std::string>()});
        } else {
            auto tab = line.find('\t');
            if (tab == std::string::npos) {
                throw DataError("seed queries line " + std::to_string(lineno)
                                + ": expected id<TAB>text");
            }
            out.push_back({line.substr(0, tab), line.substr(tab + 1)});
        }
    }
    return out;
}

} // namespace clirgen
