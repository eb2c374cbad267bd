#include <doctest.h>

#include "clirgen/errors.hpp"
#include "pipeline_helpers.hpp"

using namespace clirgen;
using namespace testutil;
namespace art = clirgen::pipeline::artifacts;

TEST_CASE("news run end to end is deterministic")
{
    TempDir a, b;
    auto ra = pipeline::run_all(run_config("news_run.json", a.path()));
    auto rb = pipeline::run_all(run_config("news_run.json", b.path()));
    REQUIRE(ra.exit_code == 0);
    REQUIRE(rb.exit_code == 0);
    CHECK(ra.manifest["status"] == "ok");

    for (auto name : {art::passages, art::pairs, art::prompts, art::triples, art::triples_tsv}) {
        CAPTURE(name);
        CHECK(slurp(a / name) == slurp(b / name));
    }
    const auto &m = ra.manifest;
    CHECK(m["pairs"] == 50);
    CHECK(m["queries"]["generated"].get<int>() > 0);
    CHECK(check_manifest_identities(m, a.path()) == "");
    CHECK(m["max_fanout"].get<int>() <= 10);
    const double tpp = m["triples_per_pair"].get<double>();
    CHECK(tpp >= 6.0);
    CHECK(tpp <= 9.0);
}

TEST_CASE("tweet run end to end")
{
    TempDir dir;
    auto r = pipeline::run_all(run_config("tweet_run.json", dir.path()));
    REQUIRE(r.exit_code == 0);
    CHECK(r.manifest["corpus"]["urls_stripped"].get<int>() > 0);
    CHECK(r.manifest["pairs"].get<int>() > 0);
    CHECK(check_manifest_identities(r.manifest, dir.path()) == "");
    CHECK(r.manifest["max_fanout"].get<int>() <= 10);
}

TEST_CASE("stats recomputed from files match the run")
{
    TempDir dir;
    auto cfg = run_config("news_run.json", dir.path());
    auto r = pipeline::run_all(cfg);
    REQUIRE(r.exit_code == 0);
    auto m = pipeline::build_manifest(cfg);
    for (auto key : {"passages", "pairs", "prompts", "tokens", "cost", "queries",
                     "fanout_histogram", "triples_per_pair"}) {
        CAPTURE(key);
        CHECK(m[key] == r.manifest[key]);
    }
}

TEST_CASE("a later stage re-runs from files alone")
{
    TempDir dir;
    auto cfg = run_config("news_run.json", dir.path());
    REQUIRE(pipeline::run_all(cfg).exit_code == 0);
    const auto triples = slurp(dir / art::triples);
    const auto tsv = slurp(dir / art::triples_tsv);

    pipeline::run_validate(cfg);
    pipeline::run_emit(cfg);
    CHECK(slurp(dir / art::triples) == triples);
    CHECK(slurp(dir / art::triples_tsv) == tsv);

    // Re-running generation replays the checkpoint without new calls.
    CountingBackend backend;
    auto g = pipeline::run_generate(cfg, {&backend, 0});
    CHECK(backend.calls == 0);
    CHECK(g.batch.issued == 0);
    CHECK(g.batch.resumed == g.batch.outcomes.size());
}

TEST_CASE("interrupted generation resumes without repeating calls")
{
    TempDir full, resumed;
    REQUIRE(pipeline::run_all(run_config("news_run.json", full.path())).exit_code == 0);

    auto cfg = run_config("news_run.json", resumed.path());
    CountingBackend backend;
    auto first = pipeline::run_all(cfg, {&backend, nullptr, 25});
    CHECK(first.exit_code == 1);
    CHECK(first.interrupted);
    CHECK(first.manifest["status"] == "interrupted");
    CHECK(first.manifest["prompts"]["pending"].get<int>() > 0);
    CHECK(!fs::exists(resumed / art::triples));

    auto second = pipeline::run_all(cfg, {&backend, nullptr, 0});
    REQUIRE(second.exit_code == 0);
    const auto rendered = second.manifest["prompts"]["rendered"].get<std::size_t>();
    CHECK(backend.calls == rendered);
    CHECK(slurp(resumed / art::triples) == slurp(full / art::triples));
    CHECK(slurp(resumed / art::triples_tsv) == slurp(full / art::triples_tsv));
}

TEST_CASE("validation refuses an incomplete checkpoint")
{
    TempDir dir;
    auto cfg = run_config("news_run.json", dir.path());
    pipeline::run_ingest(cfg);
    pipeline::run_index(cfg);
    pipeline::run_mine(cfg);
    CountingBackend backend;
    auto g = pipeline::run_generate(cfg, {&backend, 5});
    REQUIRE(g.batch.interrupted);
    CHECK_THROWS_AS(pipeline::run_validate(cfg), DataError);
}

TEST_CASE("high failure rate exits with code 2")
{
    TempDir dir;
    auto cfg = run_config("news_run.json", dir.path());
    CountingBackend backend(4); // roughly a quarter of prompts fail
    auto r = pipeline::run_all(cfg, {&backend, nullptr, 0});
    CHECK(r.exit_code == 2);
    CHECK(r.manifest["status"] == "partial");
    CHECK(r.manifest["prompts"]["failed"].get<int>() > 0);
    CHECK(r.manifest["failure_rate"].get<double>() > cfg.max_error_rate);
    CHECK(check_manifest_identities(r.manifest, dir.path()) == "");

    // Raising the threshold accepts the same run.
    TempDir dir2;
    auto lenient = run_config("news_run.json", dir2.path());
    lenient.max_error_rate = 0.9;
    CountingBackend backend2(4);
    CHECK(pipeline::run_all(lenient, {&backend2, nullptr, 0}).exit_code == 0);
}

TEST_CASE("empty corpus is fatal but still writes a manifest")
{
    TempDir dir;
    spit(dir / "empty.jsonl", "");
    auto cfg = run_config("news_run.json", dir / "work");
    cfg.input = dir / "empty.jsonl";
    auto r = pipeline::run_all(cfg);
    CHECK(r.exit_code == 1);
    CHECK(r.manifest["status"] == "failed");
    CHECK(r.manifest["passages"] == 0);
    CHECK(!r.error.empty());
    CHECK(fs::exists(dir / "work" / art::manifest));
}

TEST_CASE("missing input is fatal")
{
    TempDir dir;
    auto cfg = run_config("news_run.json", dir.path());
    cfg.input = dir / "nope.jsonl";
    auto r = pipeline::run_all(cfg);
    CHECK(r.exit_code == 1);
    CHECK(r.manifest["passages"] == 0);
}

TEST_CASE("cost from reported token counts")
{
    TempDir dir;
    auto cfg = run_config("news_run.json", dir.path());
    cfg.pair_count = 3;
    pipeline::run_ingest(cfg);
    pipeline::run_index(cfg);
    pipeline::run_mine(cfg);
    MockBackend scratch;
    pipeline::run_generate(cfg, {&scratch, 0});

    std::vector<RenderedPrompt> prompts;
    {
        std::ifstream in(dir / art::prompts);
        prompts = read_prompts(in);
    }
    REQUIRE(prompts.size() == 3);
    const std::size_t counts[3][2] = {{1000, 300}, {1200, 100}, {1100, 200}};
    {
        std::ofstream out(dir / "fixtures.jsonl");
        for (std::size_t i = 0; i < 3; ++i) {
            nlohmann::json j = {{"prompt_hash", text::fnv1a_hex(prompts[i].prompt)},
                                {"response", MockBackend::synthesize(prompts[i].prompt)},
                                {"prompt_tokens", counts[i][0]},
                                {"output_tokens", counts[i][1]}};
            out << j.dump() << '\n';
        }
    }
    fs::remove(dir / art::checkpoint);
    cfg.generation.mock_fixtures = dir / "fixtures.jsonl";
    pipeline::run_generate(cfg);
    pipeline::run_validate(cfg);
    auto m = pipeline::run_emit(cfg);

    CHECK(m["tokens"]["total"] == 3900);
    CHECK(m["tokens"]["estimated_records"] == 0);
    CHECK(m["cost"]["total_nano_usd"] == 78'000'000);
    CHECK(m["cost"]["total_usd"].get<double>() == doctest::Approx(0.078));
    CHECK(check_manifest_identities(m, dir.path()) == "");
}

TEST_CASE("unpriced mock reports zero cost")
{
    TempDir dir;
    auto cfg = run_config("news_run.json", dir.path());
    cfg.pair_count = 5;
    cfg.generation.mock_billable = false;
    REQUIRE(pipeline::run_all(cfg).exit_code == 0);
    auto m = pipeline::build_manifest(cfg);
    CHECK(m["cost"]["total_nano_usd"] == 0);
    CHECK(m["tokens"]["estimated_records"] == 5);
}

TEST_CASE("tweet mode without seed queries")
{
    TempDir dir;
    auto cfg = run_config("tweet_run.json", dir.path());
    cfg.seed_queries.reset();
    auto r = pipeline::run_all(cfg);
    CHECK(r.exit_code == 1);
    CHECK(r.error.find("seed_queries") != std::string::npos);
}
