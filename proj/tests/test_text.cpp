#include <doctest.h>

#include "clirgen/text.hpp"

using namespace clirgen::text;

TEST_CASE("utf8 round trip")
{
    const std::string s = "abc Привет 北京 سلام 😀";
    auto cps = decode_utf8(s);
    CHECK(encode_utf8(cps) == s);
    CHECK(code_point_length(s) == cps.size());
    CHECK(cps.back() == U'\U0001F600');
}

TEST_CASE("invalid bytes decode to replacement characters")
{
    auto cps = decode_utf8(std::string("a\xff" "b\xe4\xb8", 5));
    REQUIRE(cps.size() >= 3);
    CHECK(cps[0] == U'a');
    CHECK(cps[1] == 0xFFFD);
    CHECK(cps[2] == U'b');
    CHECK(cps.back() == 0xFFFD);
}

TEST_CASE("segmentation splits whitespace runs and every CJK code point")
{
    auto cps = decode_utf8("foo  bar\t北京市 x");
    auto spans = tokenize_spans(cps);
    REQUIRE(spans.size() == 6);
    CHECK(spans[0].begin == 0);
    CHECK(spans[0].end == 3);
    CHECK(spans[1].begin == 5);
    CHECK(spans[2].end - spans[2].begin == 1);
    CHECK(spans[4].end - spans[4].begin == 1);
}

TEST_CASE("zero-width joiners stay inside Persian tokens")
{
    auto toks = analyze("می‌شود خوب");
    REQUIRE(toks.size() == 2);
    CHECK(toks[0] == "می‌شود");
}

TEST_CASE("analyzer folds case and trims edge punctuation")
{
    auto toks = analyze("Hello, WORLD! «Москва» ΑΘΗΝΑ (x) -- ...");
    REQUIRE(toks.size() == 5);
    CHECK(toks[0] == "hello");
    CHECK(toks[1] == "world");
    CHECK(toks[2] == "москва");
    CHECK(toks[3] == "αθηνα");
    CHECK(toks[4] == "x");
}

TEST_CASE("analyzer keeps inner punctuation")
{
    auto toks = analyze("e-mail U.S.A.");
    REQUIRE(toks.size() == 2);
    CHECK(toks[0] == "e-mail");
    CHECK(toks[1] == "u.s.a");
}

TEST_CASE("whitespace collapse and trim")
{
    CHECK(collapse_whitespace("  a \n\t b   c ") == "a b c");
    CHECK(collapse_whitespace("") == "");
    CHECK(trim("  x y \n") == "x y");
}

TEST_CASE("fnv1a reference vectors")
{
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}
