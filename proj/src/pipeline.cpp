#include "clirgen/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "clirgen/errors.hpp"

namespace clirgen::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::ifstream open_in(const fs::path &p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + p.string());
    }
    return in;
}

/// Write through a temporary file and rename, so a crashed stage never
/// leaves a half-written artifact behind.
template <typename F>
void write_atomic(const fs::path &p, F &&fill)
{
    fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
    auto tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write " + tmp.string());
        }
        fill(out);
        out.flush();
        if (!out) {
            throw IoError("write failed: " + tmp.string());
        }
    }
    fs::rename(tmp, p);
}

void write_json(const fs::path &p, const ojson &j)
{
    write_atomic(p, [&](std::ostream &out) { out << j.dump(2) << '\n'; });
}

ojson read_json(const fs::path &p)
{
    auto in = open_in(p);
    auto j = ojson::parse(in, nullptr, false);
    if (j.is_discarded()) {
        throw DataError(p.string() + " is not valid JSON");
    }
    return j;
}

std::vector<Passage> load_passages(const PipelineConfig &cfg)
{
    auto in = open_in(cfg.artifact(artifacts::passages));
    return corpus::read_passages(in);
}

std::vector<RenderedPrompt> load_prompts(const PipelineConfig &cfg)
{
    auto in = open_in(cfg.artifact(artifacts::prompts));
    return read_prompts(in);
}

std::vector<Triple> load_triples(const PipelineConfig &cfg)
{
    auto in = open_in(cfg.artifact(artifacts::triples));
    return read_triples(in);
}

PromptTemplate load_template(const PipelineConfig &cfg)
{
    PromptTemplate t = PromptTemplate::standard();
    if (cfg.prompt_template) {
        auto in = open_in(*cfg.prompt_template);
        std::ostringstream ss;
        ss << in.rdbuf();
        t = PromptTemplate::from_text(ss.str());
    }
    t.queries_per_side = cfg.queries_per_side;
    return t;
}

std::string env_or_empty(const std::string &name)
{
    if (name.empty()) {
        return {};
    }
    const char *v = std::getenv(name.c_str());
    return v ? std::string(v) : std::string();
}

ojson to_json(const CorpusStats &s)
{
    return {{"documents_read", s.documents_read},
            {"documents_dropped", s.documents_dropped},
            {"records_malformed", s.records_malformed},
            {"duplicate_ids", s.duplicate_ids},
            {"passages_emitted", s.passages_emitted},
            {"urls_stripped", s.urls_stripped}};
}

ojson to_json(const MiningStats &s)
{
    return {{"attempts", s.attempts},
            {"pairs", s.pairs},
            {"degenerate_positive", s.degenerate_positive},
            {"no_qualifying_negative", s.no_qualifying_negative},
            {"repeated_positive", s.repeated_positive},
            {"seeds_no_hits", s.seeds_no_hits},
            {"seeds_no_positive", s.seeds_no_positive},
            {"seeds_no_negative", s.seeds_no_negative}};
}

/// Responses for the given prompts, from the checkpoint, keyed by pair id.
std::unordered_map<std::string, GenerationOutcome> checkpoint_outcomes(const PipelineConfig &cfg)
{
    std::unordered_map<std::string, GenerationOutcome> out;
    for (auto &o : load_checkpoint(cfg.artifact(artifacts::checkpoint))) {
        out[o.pair_id] = std::move(o);
    }
    return out;
}

} // namespace

std::unique_ptr<GenerationBackend> make_backend(const PipelineConfig &cfg)
{
    const auto &g = cfg.generation;
    if (g.backend == "mock") {
        MockBackend::Options o;
        o.billable = g.mock_billable;
        o.latency = std::chrono::milliseconds(g.mock_latency_ms);
        auto mock = std::make_unique<MockBackend>(o);
        if (g.mock_fixtures) {
            auto in = open_in(*g.mock_fixtures);
            mock->load_fixtures(in);
        }
        return mock;
    }
    if (g.backend == "http") {
        HttpBackend::Options o;
        o.base_url = g.url;
        o.path = g.path;
        o.model = g.model;
        o.api_key = env_or_empty(g.api_key_env);
        return std::make_unique<HttpBackend>(o);
    }
    throw ConfigError("unknown generation backend: " + g.backend);
}

std::unique_ptr<RelevanceScorer> make_scorer(const PipelineConfig &cfg)
{
    const auto &v = cfg.validation;
    if (v.scorer == "lexical") {
        return std::make_unique<LexicalScorer>(v.lexical_temperature);
    }
    if (v.scorer == "http") {
        HttpScorer::Options o;
        o.base_url = v.scorer_url;
        o.token = env_or_empty(v.scorer_token_env);
        o.batch_limit = v.scorer_batch_limit;
        return std::make_unique<HttpScorer>(o);
    }
    throw ConfigError("unknown scorer: " + v.scorer);
}

CorpusStats run_ingest(const PipelineConfig &cfg)
{
    if (cfg.input.empty() || !fs::exists(cfg.input)) {
        throw ConfigError("input corpus not found: " + cfg.input.string());
    }
    auto in = open_in(cfg.input);
    auto ingested = corpus::ingest(in, cfg.genre, cfg.lang);
    auto passages = corpus::segment_all(ingested.documents, cfg.segment);
    ingested.stats.passages_emitted = passages.size();
    write_atomic(cfg.artifact(artifacts::passages),
                 [&](std::ostream &out) { corpus::write_passages(out, passages); });
    write_json(cfg.artifact(artifacts::corpus_stats), to_json(ingested.stats));
    return ingested.stats;
}

void run_index(const PipelineConfig &cfg)
{
    auto passages = load_passages(cfg);
    if (passages.empty()) {
        throw DataError("no passages to index");
    }
    auto index = Bm25Index::build(passages, cfg.bm25);
    write_atomic(cfg.artifact(artifacts::index), [&](std::ostream &out) { index.save(out); });
}

MiningStats run_mine(const PipelineConfig &cfg)
{
    auto passages = load_passages(cfg);
    auto in = open_in(cfg.artifact(artifacts::index));
    auto index = Bm25Index::load(in);
    if (index.passage_count() != passages.size()) {
        throw DataError("index does not match passages; re-run the index stage");
    }

    std::vector<PassagePair> pairs;
    MiningStats stats;
    if (cfg.pairing.mode == PairingMode::news) {
        NewsMiner miner(passages, index, cfg.pairing);
        auto r = miner.mine(cfg.pair_count, cfg.seed, cfg.max_attempts);
        pairs = std::move(r.pairs);
        stats = r.stats;
    } else {
        if (!cfg.seed_queries) {
            throw ConfigError("tweet pairing needs pairing.seed_queries");
        }
        auto sin = open_in(*cfg.seed_queries);
        auto seeds = read_seed_queries(sin);
        auto r = mine_tweet_pairs(passages, index, seeds, cfg.pairing);
        pairs = std::move(r.pairs);
        stats = r.stats;
    }
    write_atomic(cfg.artifact(artifacts::pairs),
                 [&](std::ostream &out) { write_pairs(out, pairs); });
    write_json(cfg.artifact(artifacts::mining_stats), to_json(stats));
    return stats;
}

GenerateSummary run_generate(const PipelineConfig &cfg, const GenerateOptions &opts)
{
    auto pin = open_in(cfg.artifact(artifacts::pairs));
    auto pairs = read_pairs(pin);
    auto tmpl = load_template(cfg);

    GenerateSummary summary;
    summary.pairs = pairs.size();
    std::vector<RenderedPrompt> prompts;
    prompts.reserve(pairs.size());
    for (const auto &p : pairs) {
        try {
            prompts.push_back(render(p, tmpl, cfg.budget));
            summary.truncated += prompts.back().truncated ? 1 : 0;
        } catch (const BudgetError &) {
            ++summary.budget_rejected;
        }
    }
    write_atomic(cfg.artifact(artifacts::prompts),
                 [&](std::ostream &out) { write_prompts(out, prompts); });

    std::unique_ptr<GenerationBackend> owned;
    GenerationBackend *backend = opts.backend;
    if (!backend) {
        owned = make_backend(cfg);
        backend = owned.get();
    }

    std::vector<PromptJob> jobs;
    jobs.reserve(prompts.size());
    for (const auto &p : prompts) {
        jobs.push_back({p.pair_id, p.prompt});
    }
    BatchOptions bo;
    bo.checkpoint = cfg.artifact(artifacts::checkpoint);
    bo.max_output_tokens = cfg.generation.max_output_tokens;
    bo.unit_cost_per_1k = cfg.generation.unit_cost_per_1k;
    bo.estimator = cfg.budget.estimator;
    bo.stop_after = opts.stop_after;
    summary.batch = run_batch(jobs, *backend, cfg.generation.throttle, bo);

    write_json(cfg.artifact(artifacts::generation_stats),
               {{"pairs", summary.pairs},
                {"prompts", prompts.size()},
                {"budget_rejected", summary.budget_rejected},
                {"truncated", summary.truncated},
                {"backend", backend->name()},
                {"resumed", summary.batch.resumed},
                {"issued_this_run", summary.batch.issued},
                {"interrupted", summary.batch.interrupted}});
    return summary;
}

ValidationStats run_validate(const PipelineConfig &cfg, RelevanceScorer *scorer)
{
    auto prompts = load_prompts(cfg);
    auto outcomes = checkpoint_outcomes(cfg);

    std::vector<PairContext> contexts;
    std::vector<GeneratedQuery> queries;
    std::map<std::string, std::uint64_t> warnings;

    // Passage ids of the prompted pairs come from pairs.jsonl.
    std::unordered_map<std::string, std::pair<std::string, std::string>> ids;
    {
        auto pin = open_in(cfg.artifact(artifacts::pairs));
        for (const auto &pp : read_pairs(pin)) {
            ids[pp.pair_id] = {pp.positive.passage_id, pp.negative.passage_id};
        }
    }

    for (const auto &p : prompts) {
        auto it = outcomes.find(p.pair_id);
        if (it == outcomes.end()) {
            throw DataError("no generation outcome for " + p.pair_id
                            + "; resume the generate stage first");
        }
        if (it->second.status != OutcomeStatus::ok) {
            continue;
        }
        auto id = ids.find(p.pair_id);
        if (id == ids.end()) {
            throw DataError("prompt " + p.pair_id + " has no mined pair");
        }
        contexts.push_back({p.pair_id, id->second.first, id->second.second, p.first_text,
                            p.second_text, p.truncated});
        auto parsed = parse_response(p.pair_id, it->second.response, cfg.queries_per_side);
        for (const auto &w : parsed.warnings) {
            ++warnings[std::string(to_string(w.kind))];
        }
        for (auto &q : parsed.queries) {
            queries.push_back(std::move(q));
        }
    }

    std::unique_ptr<RelevanceScorer> owned;
    if (!scorer) {
        owned = make_scorer(cfg);
        scorer = owned.get();
    }
    auto result = validate(queries, contexts, *scorer, cfg.validation.tau);
    write_atomic(cfg.artifact(artifacts::triples),
                 [&](std::ostream &out) { write_triples(out, result.triples); });

    const auto &s = result.stats;
    ojson hist = ojson::object();
    for (const auto &[k, v] : s.fanout_histogram) {
        hist[std::to_string(k)] = v;
    }
    write_json(cfg.artifact(artifacts::validation_stats),
               {{"scorer", scorer->name()},
                {"tau", cfg.validation.tau},
                {"generated", s.generated_count},
                {"valid", s.valid_count},
                {"rejected", s.rejected_count},
                {"inverted", s.inverted_count},
                {"scorer_error", s.scorer_error_count},
                {"pairs", s.pair_count},
                {"fanout_histogram", hist},
                {"parse_warnings", ojson(warnings)}});
    return s;
}

ojson build_manifest(const PipelineConfig &cfg, double wall_clock_seconds)
{
    ojson m;
    m["config"] = cfg.to_json();
    m["analyzer"] = std::string(Bm25Index::analyzer_name);

    const auto have = [&](std::string_view name) { return fs::exists(cfg.artifact(name)); };

    if (have(artifacts::corpus_stats)) {
        m["corpus"] = read_json(cfg.artifact(artifacts::corpus_stats));
    }
    std::size_t passage_count = 0;
    if (have(artifacts::passages)) {
        passage_count = load_passages(cfg).size();
    }
    m["passages"] = passage_count;

    if (have(artifacts::pairs)) {
        auto in = open_in(cfg.artifact(artifacts::pairs));
        m["pairs"] = read_pairs(in).size();
    } else {
        m["pairs"] = 0;
    }
    if (have(artifacts::mining_stats)) {
        m["mining"] = read_json(cfg.artifact(artifacts::mining_stats));
    }

    std::uint64_t budget_rejected = 0;
    if (have(artifacts::generation_stats)) {
        budget_rejected =
            read_json(cfg.artifact(artifacts::generation_stats)).value("budget_rejected", 0ULL);
    }

    std::uint64_t issued = 0, succeeded = 0, failed = 0, truncated = 0;
    std::uint64_t prompt_tokens = 0, output_tokens = 0, estimated_records = 0;
    std::int64_t cost_nano = 0;
    if (have(artifacts::prompts)) {
        auto prompts = load_prompts(cfg);
        std::unordered_map<std::string, GenerationOutcome> outcomes;
        if (have(artifacts::checkpoint)) {
            outcomes = checkpoint_outcomes(cfg);
        }
        for (const auto &p : prompts) {
            truncated += p.truncated ? 1 : 0;
            auto it = outcomes.find(p.pair_id);
            if (it == outcomes.end()) {
                continue;
            }
            const auto &o = it->second;
            ++issued;
            (o.status == OutcomeStatus::ok ? succeeded : failed) += 1;
            prompt_tokens += o.cost.prompt_tokens;
            output_tokens += o.cost.output_tokens;
            estimated_records += o.cost.estimated ? 1 : 0;
            cost_nano += o.cost.cost_nano_usd;
        }
        m["prompts"] = {{"rendered", prompts.size()},
                        {"budget_rejected", budget_rejected},
                        {"truncated", truncated},
                        {"issued", issued},
                        {"succeeded", succeeded},
                        {"failed", failed},
                        {"pending", prompts.size() - issued}};
    }
    m["tokens"] = {{"prompt", prompt_tokens},
                   {"output", output_tokens},
                   {"total", prompt_tokens + output_tokens},
                   {"estimated_records", estimated_records}};
    m["cost"] = {{"unit_cost_per_1k", cfg.generation.unit_cost_per_1k},
                 {"total_nano_usd", cost_nano},
                 {"total_usd", static_cast<double>(cost_nano) * 1e-9}};

    std::uint64_t generated = 0, valid = 0, rejected = 0, inverted = 0, errors = 0;
    std::map<std::string, std::size_t> per_pair;
    if (have(artifacts::triples)) {
        for (const auto &t : load_triples(cfg)) {
            ++generated;
            per_pair.try_emplace(t.pair_id, 0);
            if (t.valid) {
                ++valid;
                ++per_pair[t.pair_id];
            } else if (t.rejection == RejectionReason::scorer_error) {
                ++errors;
            } else {
                ++rejected;
                inverted += t.rejection == RejectionReason::inverted ? 1 : 0;
            }
        }
    }
    // Prompted pairs whose response yielded no queries still count toward fanout.
    const std::uint64_t fanout_pairs = succeeded;
    std::map<std::size_t, std::uint64_t> hist;
    for (const auto &[id, n] : per_pair) {
        ++hist[n];
    }
    if (fanout_pairs > per_pair.size()) {
        hist[0] += fanout_pairs - per_pair.size();
    }
    ojson hj = ojson::object();
    std::size_t max_fanout = 0;
    for (const auto &[k, v] : hist) {
        hj[std::to_string(k)] = v;
        max_fanout = std::max(max_fanout, k);
    }
    m["queries"] = {{"generated", generated},
                    {"valid", valid},
                    {"rejected", rejected},
                    {"inverted", inverted},
                    {"scorer_error", errors}};
    m["triples_per_pair"] = fanout_pairs == 0
                                ? 0.0
                                : static_cast<double>(valid) / static_cast<double>(fanout_pairs);
    m["max_fanout"] = max_fanout;
    m["fanout_histogram"] = hj;

    if (have(artifacts::validation_stats)) {
        auto vs = read_json(cfg.artifact(artifacts::validation_stats));
        m["parse_warnings"] = vs.value("parse_warnings", ojson::object());
        m["scorer"] = vs.value("scorer", "");
    }
    if (wall_clock_seconds >= 0.0) {
        m["wall_clock_seconds"] = wall_clock_seconds;
    }
    return m;
}

ojson run_emit(const PipelineConfig &cfg, double wall_clock_seconds)
{
    auto triples = load_triples(cfg);
    write_atomic(cfg.artifact(artifacts::triples_tsv),
                 [&](std::ostream &out) { write_triples_tsv(out, triples); });
    auto m = build_manifest(cfg, wall_clock_seconds);
    write_json(cfg.artifact(artifacts::manifest), m);
    return m;
}

RunResult run_all(const PipelineConfig &cfg, const RunOptions &opts)
{
    const auto start = std::chrono::steady_clock::now();
    const auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    RunResult r;
    try {
        fs::create_directories(cfg.work_dir);
        run_ingest(cfg);
        run_index(cfg);
        run_mine(cfg);
        auto gen = run_generate(cfg, {opts.backend, opts.stop_after});
        if (gen.batch.interrupted) {
            r.interrupted = true;
            r.exit_code = 1;
            r.error = "generation interrupted";
            r.manifest = build_manifest(cfg, elapsed());
            r.manifest["status"] = "interrupted";
            write_json(cfg.artifact(artifacts::manifest), r.manifest);
            return r;
        }
        run_validate(cfg, opts.scorer);
        r.manifest = run_emit(cfg, elapsed());

        const auto &p = r.manifest["prompts"];
        const auto rendered = p.value("rendered", 0ULL);
        const auto failed = p.value("failed", 0ULL);
        const double rate =
            rendered == 0 ? 0.0 : static_cast<double>(failed) / static_cast<double>(rendered);
        r.manifest["failure_rate"] = rate;
        r.manifest["status"] = rate > cfg.max_error_rate ? "partial" : "ok";
        r.exit_code = rate > cfg.max_error_rate ? 2 : 0;
        write_json(cfg.artifact(artifacts::manifest), r.manifest);
    } catch (const std::exception &e) {
        r.exit_code = 1;
        r.error = e.what();
        try {
            r.manifest = build_manifest(cfg, elapsed());
        } catch (const std::exception &) {
            r.manifest = ojson::object();
            r.manifest["passages"] = 0;
        }
        r.manifest["status"] = "failed";
        r.manifest["error"] = r.error;
        try {
            write_json(cfg.artifact(artifacts::manifest), r.manifest);
        } catch (const std::exception &) {
        }
    }
    return r;
}

} // namespace clirgen::pipeline
