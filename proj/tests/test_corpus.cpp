#include <doctest.h>

#include <random>
#include <sstream>

#include "clirgen/corpus.hpp"
#include "clirgen/errors.hpp"
#include "clirgen/text.hpp"
#include "test_util.hpp"

using namespace clirgen;

namespace {

Document doc(std::string id, std::string text, Genre g = Genre::news)
{
    Document d;
    d.doc_id = std::move(id);
    d.lang = "rus";
    d.genre = g;
    d.text = std::move(text);
    return d;
}

struct OracleWindow {
    std::size_t offset;
    std::size_t len;
    std::size_t tokens;
};

// Independent reference for ASCII text: scan for space-separated words, then
// enumerate window starts 0, s, 2s, ... up to the first window touching the end.
std::vector<OracleWindow> oracle_windows(const std::string &s, std::size_t w, std::size_t stride)
{
    std::vector<std::pair<std::size_t, std::size_t>> words;
    for (std::size_t i = 0; i < s.size();) {
        if (s[i] == ' ') {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ') {
            ++j;
        }
        words.emplace_back(i, j);
        i = j;
    }
    std::vector<OracleWindow> out;
    const auto n = words.size();
    for (std::size_t start = 0; start < n; start += stride) {
        const auto end = std::min(n, start + w);
        out.push_back({words[start].first, words[end - 1].second - words[start].first, end - start});
        if (end == n) {
            break;
        }
    }
    return out;
}

} // namespace

TEST_CASE("url stripping removes links of every form")
{
    std::uint64_t removed = 0;
    auto s = corpus::strip_urls("see https://x.com/a?b=1 and www.foo.org/p and t.co/abc now", removed);
    CHECK(removed == 3);
    CHECK(!corpus::contains_url(s));
    CHECK(corpus::normalize("see https://x.com/a  and\n\nmore http://t.co/x", Genre::tweet_thread,
                            removed)
          == "see and more");
    CHECK(corpus::contains_url("HTTP://EXAMPLE.COM"));
    CHECK(!corpus::contains_url("no links here"));
}

TEST_CASE("news text keeps links and layout")
{
    std::uint64_t removed = 0;
    auto s = corpus::normalize("  line one https://x.org\nline two  ", Genre::news, removed);
    CHECK(s == "line one https://x.org\nline two");
    CHECK(removed == 0);
}

TEST_CASE("ingest counts malformed, duplicate and empty records")
{
    std::istringstream in(R"({"id":"a","text":"alpha beta"}
not json
{"id":"b"}
{"id":"a","text":"duplicate"}
{"id":"c","text":"   "}
{"id":7,"title":"T","text":"gamma https://t.co/x","url":"u"}
)");
    auto r = corpus::ingest(in, Genre::tweet_thread, "fas");
    REQUIRE(r.documents.size() == 2);
    CHECK(r.documents[0].doc_id == "a");
    CHECK(r.documents[1].doc_id == "7");
    CHECK(r.documents[1].text == "gamma");
    CHECK(r.documents[1].title == "T");
    CHECK(r.stats.records_malformed == 2);
    CHECK(r.stats.duplicate_ids == 1);
    CHECK(r.stats.documents_dropped == 1);
    CHECK(r.stats.urls_stripped == 1);
    CHECK(r.stats.documents_read == 6);
}

TEST_CASE("parallel ingest equals serial ingest")
{
    auto text = testutil::slurp(testutil::fixture("tweets_fas.jsonl"));
    std::istringstream a(text), b(text);
    auto p = corpus::ingest(a, Genre::tweet_thread, "fas");
    auto s = corpus::ingest_serial(b, Genre::tweet_thread, "fas");
    REQUIRE(p.documents.size() == s.documents.size());
    for (std::size_t i = 0; i < p.documents.size(); ++i) {
        CHECK(p.documents[i].text == s.documents[i].text);
    }
    CHECK(p.stats.urls_stripped == s.stats.urls_stripped);
    CHECK(p.stats.urls_stripped > 0);
}

TEST_CASE("segmentation matches the enumeration oracle")
{
    std::mt19937_64 rng(5);
    for (int iter = 0; iter < 300; ++iter) {
        const std::size_t n_words = rng() % 60;
        const std::size_t w = 1 + rng() % 12;
        const std::size_t stride = 1 + rng() % w;
        std::string s;
        for (std::size_t i = 0; i < n_words; ++i) {
            if (i) {
                s += std::string(1 + rng() % 2, ' ');
            }
            s += std::string(1 + rng() % 5, static_cast<char>('a' + rng() % 26));
        }
        auto ps = corpus::segment(doc("d", s), {w, stride});
        auto expect = oracle_windows(s, w, stride);
        REQUIRE(ps.size() == expect.size());
        for (std::size_t i = 0; i < ps.size(); ++i) {
            CHECK(ps[i].ordinal == i);
            CHECK(ps[i].passage_id == "d#" + std::to_string(i));
            CHECK(ps[i].char_offset == expect[i].offset);
            CHECK(ps[i].char_len == expect[i].len);
            CHECK(ps[i].token_count == expect[i].tokens);
            CHECK(ps[i].text == s.substr(expect[i].offset, expect[i].len));
        }
    }
}

TEST_CASE("default windowing: 180 tokens, stride 90")
{
    std::string s;
    for (int i = 0; i < 400; ++i) {
        s += (i ? " w" : "w") + std::to_string(i);
    }
    auto ps = corpus::segment(doc("d", s));
    REQUIRE(ps.size() == 4);
    CHECK(ps[0].token_count == 180);
    CHECK(ps[1].text.starts_with("w90 "));
    CHECK(ps[3].token_count == 130);
    CHECK(ps[3].text.ends_with("w399"));

    CHECK(corpus::segment(doc("short", "only three words")).size() == 1);
    CHECK(corpus::segment(doc("empty", "")).empty());
}

TEST_CASE("every token is covered and passages are contiguous slices")
{
    std::string s = "Первый абзац текста.\nВторой абзац 北京 и ещё слова";
    auto ps = corpus::segment(doc("d", s), {3, 2});
    const auto cps = text::decode_utf8(s);
    std::vector<bool> covered(cps.size(), false);
    for (const auto &p : ps) {
        auto slice = std::u32string_view(cps).substr(p.char_offset, p.char_len);
        CHECK(text::encode_utf8(slice) == p.text);
        for (std::size_t i = p.char_offset; i < p.char_offset + p.char_len; ++i) {
            covered[i] = true;
        }
    }
    for (std::size_t i = 0; i < cps.size(); ++i) {
        if (!text::is_space(cps[i])) {
            CHECK(covered[i]);
        }
    }
}

TEST_CASE("invalid segment configs are rejected")
{
    CHECK_THROWS_AS(corpus::segment(doc("d", "x"), {0, 1}), ConfigError);
    CHECK_THROWS_AS(corpus::segment(doc("d", "x"), {5, 6}), ConfigError);
    CHECK_THROWS_AS(corpus::segment(doc("d", "x"), {5, 0}), ConfigError);
}

TEST_CASE("segment_all is identical to the serial path and round trips")
{
    std::ifstream in(testutil::fixture("news_rus.jsonl"));
    auto r = corpus::ingest(in, Genre::news, "rus");
    auto par = corpus::segment_all(r.documents);
    auto ser = corpus::segment_all_serial(r.documents);
    CHECK(par == ser);

    std::stringstream ss;
    corpus::write_passages(ss, par);
    auto back = corpus::read_passages(ss);
    CHECK(back == par);
}
