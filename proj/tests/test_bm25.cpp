#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "bm25_oracle.hpp"
#include "clirgen/bm25.hpp"
#include "clirgen/errors.hpp"
#include "test_util.hpp"

using namespace clirgen;
using testutil::passage;

namespace {

std::vector<Passage> toy()
{
    return {passage("P1", "d1", "volcano erupts ash"), passage("P2", "d2", "volcano tourism guide"),
            passage("P3", "d3", "stock market falls")};
}

std::vector<Passage> random_corpus(std::mt19937_64 &rng, std::size_t n, std::size_t vocab)
{
    std::vector<Passage> ps;
    for (std::size_t i = 0; i < n; ++i) {
        std::string s;
        const auto len = 1 + rng() % 25;
        for (std::size_t j = 0; j < len; ++j) {
            s += (j ? " " : "") + std::string("w") + std::to_string(rng() % vocab);
        }
        char id[16];
        std::snprintf(id, sizeof id, "p%04zu", i);
        ps.push_back(passage(id, "d" + std::to_string(i / 3), s));
    }
    return ps;
}

} // namespace

TEST_CASE("toy corpus: hand-computed scores")
{
    auto ps = toy();
    auto idx = Bm25Index::build(ps);
    // All lengths equal the average and tf = 1, so each matching term
    // contributes exactly its idf.
    const double idf_volcano = std::log(1.5 / 2.5 + 1.0); // df 2 of 3
    const double idf_ash = std::log(2.5 / 1.5 + 1.0);     // df 1 of 3
    auto hits = idx.search("volcano ash", 10);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].passage_id == "P1");
    CHECK(hits[0].rank == 1);
    CHECK(hits[0].score == doctest::Approx(idf_volcano + idf_ash).epsilon(1e-12));
    CHECK(hits[0].score == doctest::Approx(1.450833).epsilon(1e-6));
    CHECK(hits[1].passage_id == "P2");
    CHECK(hits[1].score == doctest::Approx(0.470004).epsilon(1e-6));
    CHECK(idx.score("volcano ash", 2) == 0.0);
}

TEST_CASE("self match ranks first on the toy corpus")
{
    auto ps = toy();
    auto idx = Bm25Index::build(ps);
    for (std::uint32_t i = 0; i < ps.size(); ++i) {
        auto hits = idx.search(ps[i].text, 3);
        REQUIRE(!hits.empty());
        CHECK(hits[0].passage_id == ps[i].passage_id);
    }
}

TEST_CASE("degenerate queries and corpora")
{
    auto idx = Bm25Index::build(toy());
    CHECK(idx.search("zzz qqq", 5).empty());
    CHECK(idx.search("", 5).empty());
    CHECK(idx.search("... ,,,", 5).empty());
    CHECK_THROWS_AS(idx.search("volcano", 0), ConfigError);

    auto empty = Bm25Index::build({});
    CHECK(empty.passage_count() == 0);
    CHECK(empty.search("volcano", 5).empty());

    auto dup = toy();
    dup[2].passage_id = "P1";
    CHECK_THROWS_AS(Bm25Index::build(dup), ConfigError);
}

TEST_CASE("average document length")
{
    std::vector<Passage> ps = {passage("a", "d", "a b c d"), passage("b", "d", "a b c d e f"),
                               passage("c", "d", "a b c d e f g h")};
    auto idx = Bm25Index::build(ps);
    CHECK(idx.avg_doc_len() == doctest::Approx(6.0));
    CHECK(idx.doc_length(2) == 8);
}

TEST_CASE("search equals the brute-force oracle")
{
    std::mt19937_64 rng(17);
    for (int round = 0; round < 6; ++round) {
        const std::size_t n = round == 0 ? 1000 : 50 + rng() % 300;
        auto ps = random_corpus(rng, n, 40 + rng() % 200);
        auto idx = Bm25Index::build(ps);
        testutil::BruteBm25 oracle(ps);
        for (int q = 0; q < 25; ++q) {
            const auto &src = ps[rng() % ps.size()].text;
            const std::string query = q % 3 == 0 ? src : src.substr(0, src.size() / 2) + " w1 w1";
            const std::size_t k = 1 + rng() % 60;
            auto hits = idx.search(query, k);
            auto expect = oracle.rank(query);
            REQUIRE(hits.size() == std::min(k, expect.size()));
            for (std::size_t i = 0; i < hits.size(); ++i) {
                CHECK(hits[i].rank == i + 1);
                CHECK(hits[i].score == doctest::Approx(expect[i].score).epsilon(1e-9));
                CHECK(hits[i].score
                      == doctest::Approx(oracle.score(query, hits[i].ordinal)).epsilon(1e-9));
                if (i > 0) {
                    CHECK(hits[i - 1].score >= hits[i].score);
                    if (hits[i - 1].score == hits[i].score) {
                        CHECK(hits[i - 1].passage_id < hits[i].passage_id);
                    }
                }
                CHECK(idx.score(query, hits[i].ordinal) == hits[i].score);
            }
        }
    }
}

TEST_CASE("scores are invariant under query term permutation")
{
    std::mt19937_64 rng(3);
    auto ps = random_corpus(rng, 200, 60);
    auto idx = Bm25Index::build(ps);
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<std::string> words;
        for (int i = 0; i < 8; ++i) {
            words.push_back("w" + std::to_string(rng() % 60));
        }
        auto join = [&] {
            std::string s;
            for (const auto &w : words) {
                s += (s.empty() ? "" : " ") + w;
            }
            return s;
        };
        const auto a = join();
        std::shuffle(words.begin(), words.end(), rng);
        const auto b = join();
        const auto ord = static_cast<std::uint32_t>(rng() % ps.size());
        CHECK(idx.score(a, ord) == idx.score(b, ord)); // exact
    }
}

TEST_CASE("adding a passage leaves existing term frequencies alone")
{
    std::mt19937_64 rng(9);
    auto ps = random_corpus(rng, 100, 30);
    auto before = Bm25Index::build(ps);
    ps.push_back(passage("zz-new", "dnew", "w1 w2 w3 w3 w29 brand new"));
    auto after = Bm25Index::build(ps);
    for (int t = 0; t < 30; ++t) {
        const auto term = "w" + std::to_string(t);
        auto a = before.postings(term);
        auto b = after.postings(term);
        REQUIRE(b.size() >= a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].ordinal == b[i].ordinal);
            CHECK(a[i].tf == b[i].tf);
        }
    }
}

TEST_CASE("serialization is deterministic and lossless")
{
    std::mt19937_64 rng(21);
    auto ps = random_corpus(rng, 150, 80);
    std::ostringstream a, b;
    Bm25Index::build(ps).save(a);
    Bm25Index::build(ps).save(b);
    CHECK(a.str() == b.str());
    CHECK(a.str().find(Bm25Index::analyzer_name) != std::string::npos);

    std::istringstream in(a.str());
    auto loaded = Bm25Index::load(in);
    auto orig = Bm25Index::build(ps);
    CHECK(loaded.passage_count() == orig.passage_count());
    CHECK(loaded.avg_doc_len() == orig.avg_doc_len());
    for (int q = 0; q < 20; ++q) {
        const auto &query = ps[rng() % ps.size()].text;
        auto x = orig.search(query, 20);
        auto y = loaded.search(query, 20);
        REQUIRE(x.size() == y.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(x[i].passage_id == y[i].passage_id);
            CHECK(x[i].score == y[i].score);
        }
    }
    std::istringstream bad("not an index\n");
    CHECK_THROWS(Bm25Index::load(bad));
}

TEST_CASE("batch search equals serial search")
{
    std::mt19937_64 rng(33);
    auto ps = random_corpus(rng, 400, 120);
    auto idx = Bm25Index::build(ps);
    std::vector<std::string> queries;
    for (int i = 0; i < 64; ++i) {
        queries.push_back(ps[rng() % ps.size()].text);
    }
    auto par = idx.search_batch(queries, 30);
    auto ser = idx.search_batch_serial(queries, 30);
    REQUIRE(par.size() == ser.size());
    for (std::size_t i = 0; i < par.size(); ++i) {
        REQUIRE(par[i].size() == ser[i].size());
        for (std::size_t j = 0; j < par[i].size(); ++j) {
            CHECK(par[i][j].ordinal == ser[i][j].ordinal);
            CHECK(par[i][j].score == ser[i][j].score);
        }
    }
}
