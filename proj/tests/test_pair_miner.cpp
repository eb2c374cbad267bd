#include <doctest.h>

#include <fstream>
#include <sstream>

#include "clirgen/errors.hpp"
#include "clirgen/pair_miner.hpp"
#include "pair_checker.hpp"
#include "test_util.hpp"

using namespace clirgen;
using testutil::passage;

namespace {

std::vector<Passage> load_corpus(const char *file, Genre g, const char *lang)
{
    std::ifstream in(testutil::fixture(file));
    auto r = corpus::ingest(in, g, lang);
    return corpus::segment_all(r.documents);
}

std::vector<SeedQuery> load_seeds(const char *file)
{
    std::ifstream in(testutil::fixture(file));
    return read_seed_queries(in);
}

} // namespace

TEST_CASE("negative selection walks the ranked list")
{
    // self-score 10: candidates at 9.0 and 6.0 have ratios 0.90 and 0.60
    std::vector<RankedCandidate> ranked = {{"X", 300, 200, 9.0}, {"Y", 300, 200, 6.0}};
    auto pick = select_news_negative(ranked, 10.0, "P", 0.65);
    REQUIRE(pick);
    CHECK(*pick == 1);
}

TEST_CASE("one sibling at or above the threshold disqualifies its document")
{
    std::vector<RankedCandidate> ranked = {
        {"D", 300, 200, 7.0}, {"D", 300, 200, 5.5}, {"E", 300, 200, 5.0}};
    auto pick = select_news_negative(ranked, 10.0, "P", 0.65);
    REQUIRE(pick);
    CHECK(*pick == 2);

    // a sibling ranked after the candidate still disqualifies it
    std::vector<RankedCandidate> late = {{"D", 300, 200, 5.5}, {"D", 300, 200, 6.5}};
    CHECK(!select_news_negative(late, 10.0, "P", 0.65));
}

TEST_CASE("negative selection skips short and same-document candidates")
{
    std::vector<RankedCandidate> ranked = {
        {"P", 300, 200, 5.0}, {"X", 150, 200, 5.0}, {"Z", 250, 200, 4.0}};
    auto pick = select_news_negative(ranked, 10.0, "P", 0.65);
    REQUIRE(pick);
    CHECK(*pick == 2);
    CHECK(!select_news_negative({}, 10.0, "P", 0.65));
}

TEST_CASE("LCS gate arithmetic")
{
    // "AAAA BBBB DDDD EEEE" is 19 chars with a 10-char overlap: 9 outside
    CHECK(!passes_lcs_gate(14, 19, 10, 20, 0.40));
    CHECK(passes_lcs_gate(100, 100, 50, 20, 0.40));
    CHECK(!passes_lcs_gate(100, 100, 61, 20, 0.40)); // 39% outside
    CHECK(passes_lcs_gate(100, 100, 60, 20, 0.40));  // exactly 40%
    CHECK(!passes_lcs_gate(30, 100, 11, 20, 0.40));  // shorter side keeps only 19
}

TEST_CASE("pairing configs")
{
    auto news = PairingConfig::news_defaults();
    CHECK(news.min_chars_for("zho") == 75);
    CHECK(news.min_chars_for("fas") == 100);
    CHECK(news.min_chars_for("rus") == 200);
    CHECK(news.ratio_threshold == 0.65);
    CHECK(news.exclude_same_document);
    CHECK_THROWS_AS(news.min_chars_for("deu"), ConfigError);

    auto tweet = PairingConfig::tweet_defaults();
    CHECK(tweet.min_chars_for("zho") == 15);
    CHECK(tweet.min_chars_for("fas") == 25);
    CHECK(tweet.ratio_threshold == 0.8);
    CHECK(tweet.unique_pairing);
    CHECK(!tweet.exclude_same_document);
    CHECK(tweet.lcs_min_outside_chars == 20);

    news.ratio_threshold = 1.5;
    CHECK_THROWS_AS(news.validate(), ConfigError);
}

TEST_CASE("a one-document corpus yields no pair")
{
    std::vector<Passage> ps;
    std::string text;
    for (int i = 0; i < 60; ++i) {
        text += "слово" + std::to_string(i % 9) + " ";
    }
    for (int i = 0; i < 4; ++i) {
        ps.push_back(passage("d#" + std::to_string(i), "d", text + std::to_string(i)));
    }
    auto idx = Bm25Index::build(ps);
    NewsMiner miner(ps, idx, PairingConfig::news_defaults());
    NoPairReason why = NoPairReason::none;
    CHECK(!miner.mine_one(1, &why));
    CHECK(why == NoPairReason::no_qualifying_negative);
    auto r = miner.mine(5, 1, 20);
    CHECK(r.pairs.empty());
    CHECK(r.stats.attempts == 20);
}

TEST_CASE("news mining is reproducible and parallel equals serial")
{
    auto ps = load_corpus("news_rus.jsonl", Genre::news, "rus");
    auto idx = Bm25Index::build(ps);
    NewsMiner miner(ps, idx, PairingConfig::news_defaults());
    auto a = miner.mine(40, 99);
    auto b = miner.mine(40, 99);
    auto s = miner.mine_serial(40, 99);
    REQUIRE(a.pairs.size() == 40);
    REQUIRE(a.pairs.size() == s.pairs.size());
    for (std::size_t i = 0; i < a.pairs.size(); ++i) {
        CHECK(a.pairs[i].positive.passage_id == b.pairs[i].positive.passage_id);
        CHECK(a.pairs[i].positive.passage_id == s.pairs[i].positive.passage_id);
        CHECK(a.pairs[i].negative.passage_id == s.pairs[i].negative.passage_id);
        CHECK(a.pairs[i].score_ratio == s.pairs[i].score_ratio);
    }
    CHECK(a.stats.attempts == s.stats.attempts);

    testutil::PairChecker checker(ps, PairingConfig::news_defaults());
    auto violations = checker.check(a.pairs);
    for (const auto &v : violations) {
        MESSAGE(v);
    }
    CHECK(violations.empty());
}

TEST_CASE("tweet mining respects uniqueness, LCS and dual retrieval")
{
    auto ps = load_corpus("tweets_fas.jsonl", Genre::tweet_thread, "fas");
    auto seeds = load_seeds("tweet_seeds.tsv");
    auto idx = Bm25Index::build(ps);
    auto cfg = PairingConfig::tweet_defaults();
    auto r = mine_tweet_pairs(ps, idx, seeds, cfg);
    CHECK(r.pairs.size() > 20);
    CHECK(r.stats.attempts == seeds.size());
    testutil::PairChecker checker(ps, cfg);
    auto violations = checker.check(r.pairs, seeds);
    for (const auto &v : violations) {
        MESSAGE(v);
    }
    CHECK(violations.empty());
}

TEST_CASE("repeated seed queries cannot reuse a positive")
{
    auto ps = load_corpus("tweets_fas.jsonl", Genre::tweet_thread, "fas");
    auto seeds = load_seeds("tweet_seeds.tsv");
    std::vector<SeedQuery> twice = {seeds[0], {"again", seeds[0].text}};
    auto idx = Bm25Index::build(ps);
    auto r = mine_tweet_pairs(ps, idx, twice, PairingConfig::tweet_defaults());
    REQUIRE(r.pairs.size() >= 1);
    if (r.pairs.size() == 2) {
        CHECK(r.pairs[0].positive.passage_id != r.pairs[1].positive.passage_id);
        CHECK(r.pairs[0].negative.passage_id != r.pairs[1].negative.passage_id);
    } else {
        CHECK(r.stats.attempts == 2);
    }
}

TEST_CASE("mode mismatch and empty seeds are configuration errors")
{
    auto ps = load_corpus("tweets_fas.jsonl", Genre::tweet_thread, "fas");
    auto idx = Bm25Index::build(ps);
    CHECK_THROWS_AS(mine_tweet_pairs(ps, idx, {}, PairingConfig::tweet_defaults()), ConfigError);
    std::vector<SeedQuery> seeds = {{"s", "x"}};
    CHECK_THROWS_AS(mine_tweet_pairs(ps, idx, seeds, PairingConfig::news_defaults()), ConfigError);
}

TEST_CASE("pairs and seed queries round trip")
{
    auto ps = load_corpus("news_rus.jsonl", Genre::news, "rus");
    auto idx = Bm25Index::build(ps);
    NewsMiner miner(ps, idx, PairingConfig::news_defaults());
    auto r = miner.mine(5, 3);
    std::stringstream ss;
    write_pairs(ss, r.pairs);
    auto back = read_pairs(ss);
    REQUIRE(back.size() == r.pairs.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].pair_id == r.pairs[i].pair_id);
        CHECK(back[i].positive == r.pairs[i].positive);
        CHECK(back[i].negative == r.pairs[i].negative);
        CHECK(back[i].score_ratio == r.pairs[i].score_ratio);
        CHECK(back[i].positive_self_score == r.pairs[i].positive_self_score);
    }

    std::istringstream seeds("{\"id\":\"a\",\"text\":\"one two\"}\nb\tthree four\n\n");
    auto sq = read_seed_queries(seeds);
    REQUIRE(sq.size() == 2);
    CHECK(sq[1].id == "b");
    CHECK(sq[1].text == "three four");
}
