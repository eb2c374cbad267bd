#include <set>
#include <sstream>

#include <doctest.h>

#include "clirgen/assess.hpp"
#include "clirgen/errors.hpp"
#include "test_util.hpp"

using namespace clirgen;
using namespace clirgen::assess;
using namespace testutil;

namespace {

std::vector<Triple> make_triples(std::size_t n)
{
    std::vector<Triple> out;
    for (std::size_t i = 0; i < n; ++i) {
        Triple t;
        t.triple_id = "pair-" + std::to_string(i) + "-q0";
        t.pair_id = "pair-" + std::to_string(i);
        t.query = "query " + std::to_string(i);
        t.positive_text = "pos";
        t.negative_text = "neg";
        t.valid = i % 3 != 0;
        out.push_back(t);
    }
    return out;
}

} // namespace

TEST_CASE("labelled fixture reproduces both accuracies")
{
    std::ifstream in(fixture("assessment_labels.jsonl"));
    auto records = read_records(in);
    REQUIRE(records.size() == 61);
    auto r = summarize(records);
    CHECK(r.count(Category::both_correct) == 41);
    CHECK(r.count(Category::underspecified) == 3);
    CHECK(format_percent(r.strict) == "67.2%");
    CHECK(format_percent(r.lenient) == "72.1%");
    CHECK(r.strict == doctest::Approx(41.0 / 61.0));
    CHECK(r.lenient == doctest::Approx(44.0 / 61.0));
}

TEST_CASE("empty label set")
{
    auto r = summarize({});
    CHECK(r.total == 0);
    CHECK(r.strict == 0.0);
    CHECK(r.lenient == 0.0);
}

TEST_CASE("category names and digits")
{
    CHECK(parse_category("1") == Category::both_correct);
    CHECK(parse_category("5") == Category::underspecified);
    CHECK(parse_category("nonrelevance_wrong") == Category::nonrelevance_wrong);
    CHECK(!parse_category("6"));
    CHECK(!parse_category("correct"));
    for (std::size_t i = 0; i < category_count; ++i) {
        const auto c = static_cast<Category>(i);
        CHECK(parse_category(to_string(c)) == c);
    }
}

TEST_CASE("sampling is a seeded subset without repeats")
{
    auto s = sample_indices(100, 61, 9);
    CHECK(s.size() == 61);
    CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 61);
    CHECK(s == sample_indices(100, 61, 9));
    CHECK(s != sample_indices(100, 61, 10));
    CHECK(sample_indices(10, 61, 9).size() == 10);
    CHECK(sample_indices(0, 61, 9).empty());
    CHECK(sample_indices(10, 0, 9).empty());
}

TEST_CASE("records round trip")
{
    std::stringstream ss;
    write_record(ss, {"t1", Category::both_wrong, std::nullopt});
    write_record(ss, {"t2", Category::underspecified, std::string("vague")});
    auto back = read_records(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[0].category == Category::both_wrong);
    CHECK(!back[0].note);
    CHECK(back[1].note == "vague");

    std::istringstream bad("{\"triple_id\":\"x\",\"category\":\"maybe\"}\n");
    CHECK_THROWS_AS(read_records(bad), DataError);
}

TEST_CASE("interactive session, paused and resumed")
{
    TempDir dir;
    auto triples = make_triples(30);
    SessionOptions opts;
    opts.sample_size = 5;
    opts.seed = 3;
    opts.labels = dir / "labels.jsonl";

    std::istringstream first("1\nbogus\n5 too generic\nq\n");
    std::ostringstream out1;
    auto r1 = run_session(triples, opts, first, out1);
    CHECK(r1.sampled == 5);
    CHECK(r1.labeled_now == 2);
    CHECK(!r1.completed);
    CHECK(out1.str().find("unrecognized answer") != std::string::npos);
    CHECK(out1.str().find("QUERY: ") != std::string::npos);

    std::istringstream second("2\n3\n4\n");
    std::ostringstream out2;
    auto r2 = run_session(triples, opts, second, out2);
    CHECK(r2.labeled_now == 3);
    CHECK(r2.completed);
    CHECK(r2.report.total == 5);
    CHECK(r2.report.count(Category::both_correct) == 1);
    CHECK(r2.report.count(Category::underspecified) == 1);
    CHECK(r2.report.strict == doctest::Approx(0.2));
    CHECK(r2.report.lenient == doctest::Approx(0.4));

    std::ifstream in(opts.labels);
    auto saved = read_records(in);
    REQUIRE(saved.size() == 5);
    CHECK(saved[1].note == "too generic");

    // Only valid triples are sampled by default.
    std::set<std::string> valid_ids;
    for (const auto &t : triples) {
        if (t.valid) {
            valid_ids.insert(t.triple_id);
        }
    }
    for (const auto &rec : saved) {
        CHECK(valid_ids.contains(rec.triple_id));
    }
}

TEST_CASE("end of input pauses the session")
{
    auto triples = make_triples(10);
    SessionOptions opts;
    opts.sample_size = 3;
    std::istringstream in("1\n");
    std::ostringstream out;
    auto r = run_session(triples, opts, in, out);
    CHECK(r.labeled_now == 1);
    CHECK(!r.completed);
    CHECK(r.report.total == 1);
}
