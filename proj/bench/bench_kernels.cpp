// OpenMP kernels against their serial references on the committed fixtures.
// Run from the build directory: ./bench_kernels <path-to-tests/fixtures>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "clirgen/bm25.hpp"
#include "clirgen/corpus.hpp"
#include "clirgen/pair_miner.hpp"
#include "clirgen/validator.hpp"

using namespace clirgen;
namespace fs = std::filesystem;

namespace {

fs::path g_fixtures = "tests/fixtures";

std::string read_file(const fs::path &p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string &raw_news()
{
    static const std::string s = read_file(g_fixtures / "mining_news_rus.jsonl");
    return s;
}

const std::vector<Document> &documents()
{
    static const auto docs = [] {
        std::istringstream in(raw_news());
        return corpus::ingest(in, Genre::news, "rus").documents;
    }();
    return docs;
}

const std::vector<Passage> &passages()
{
    static const auto ps = corpus::segment_all(documents());
    return ps;
}

const Bm25Index &index()
{
    static const auto idx = Bm25Index::build(passages());
    return idx;
}

std::vector<std::string> queries()
{
    std::vector<std::string> q;
    for (const auto &p : passages()) {
        q.push_back(p.text);
    }
    q.resize(std::min<std::size_t>(q.size(), 200));
    return q;
}

std::vector<ScoreItem> score_items()
{
    std::vector<ScoreItem> items;
    const auto &ps = passages();
    for (std::size_t i = 0; i + 1 < ps.size(); ++i) {
        items.push_back({ps[i].text.substr(0, 120), ps[i + 1].text});
    }
    return items;
}

void BM_ingest(benchmark::State &st)
{
    for (auto _ : st) {
        std::istringstream in(raw_news());
        benchmark::DoNotOptimize(corpus::ingest(in, Genre::news, "rus"));
    }
}

void BM_ingest_serial(benchmark::State &st)
{
    for (auto _ : st) {
        std::istringstream in(raw_news());
        benchmark::DoNotOptimize(corpus::ingest_serial(in, Genre::news, "rus"));
    }
}

void BM_segment(benchmark::State &st)
{
    for (auto _ : st) {
        benchmark::DoNotOptimize(corpus::segment_all(documents()));
    }
}

void BM_segment_serial(benchmark::State &st)
{
    for (auto _ : st) {
        benchmark::DoNotOptimize(corpus::segment_all_serial(documents()));
    }
}

void BM_search_batch(benchmark::State &st)
{
    const auto q = queries();
    for (auto _ : st) {
        benchmark::DoNotOptimize(index().search_batch(q, 1000));
    }
}

void BM_search_batch_serial(benchmark::State &st)
{
    const auto q = queries();
    for (auto _ : st) {
        benchmark::DoNotOptimize(index().search_batch_serial(q, 1000));
    }
}

void BM_mine(benchmark::State &st)
{
    NewsMiner miner(passages(), index(), PairingConfig::news_defaults());
    for (auto _ : st) {
        benchmark::DoNotOptimize(miner.mine(100, 1));
    }
}

void BM_mine_serial(benchmark::State &st)
{
    NewsMiner miner(passages(), index(), PairingConfig::news_defaults());
    for (auto _ : st) {
        benchmark::DoNotOptimize(miner.mine_serial(100, 1));
    }
}

void BM_lexical(benchmark::State &st)
{
    const auto items = score_items();
    LexicalScorer s;
    for (auto _ : st) {
        benchmark::DoNotOptimize(s.score_batch(items));
    }
}

void BM_lexical_serial(benchmark::State &st)
{
    const auto items = score_items();
    LexicalScorer s;
    for (auto _ : st) {
        benchmark::DoNotOptimize(s.score_batch_serial(items));
    }
}

} // namespace

BENCHMARK(BM_ingest)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ingest_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_segment)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_segment_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_search_batch)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_search_batch_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_mine)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_mine_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_lexical)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_lexical_serial)->Unit(benchmark::kMillisecond)->UseRealTime();

int main(int argc, char **argv)
{
    benchmark::Initialize(&argc, argv);
    if (argc > 1) {
        g_fixtures = argv[1];
    }
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    return 0;
}
