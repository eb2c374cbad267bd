#include "clirgen/assess.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include <json.hpp>

#include "clirgen/errors.hpp"
#include "clirgen/pair_miner.hpp"
#include "clirgen/text.hpp"

namespace clirgen::assess {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, category_count> kNames = {
    "both_correct", "relevance_wrong", "nonrelevance_wrong", "both_wrong", "underspecified"};

} // namespace

std::string_view to_string(Category c)
{
    return kNames[static_cast<std::size_t>(c)];
}

std::optional<Category> parse_category(std::string_view s)
{
    if (s.size() == 1 && s[0] >= '1' && s[0] <= '5') {
        return static_cast<Category>(s[0] - '1');
    }
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (s == kNames[i]) {
            return static_cast<Category>(i);
        }
    }
    return std::nullopt;
}

Report summarize(std::span<const Record> records)
{
    Report r;
    r.total = records.size();
    for (const auto &rec : records) {
        ++r.counts[static_cast<std::size_t>(rec.category)];
    }
    if (r.total > 0) {
        const auto n = static_cast<double>(r.total);
        const auto good = r.count(Category::both_correct);
        r.strict = static_cast<double>(good) / n;
        r.lenient = static_cast<double>(good + r.count(Category::underspecified)) / n;
    }
    return r;
}

std::string format_percent(double fraction)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", fraction * 100.0);
    return buf;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t sample_size,
                                        std::uint64_t seed)
{
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
        idx[i] = i;
    }
    const auto k = std::min(n, sample_size);
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(mix_seed(seed, i) % (n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

void write_record(std::ostream &out, const Record &r)
{
    ojson j;
    j["triple_id"] = r.triple_id;
    j["category"] = to_string(r.category);
    if (r.note) {
        j["note"] = *r.note;
    }
    out << j.dump() << '\n';
}

std::vector<Record> read_records(std::istream &in)
{
    std::vector<Record> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) {
            continue;
        }
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("triple_id")
            || !j.contains("category")) {
            throw DataError("labels line " + std::to_string(lineno) + " is malformed");
        }
        auto cat = parse_category(j["category"].get<std::string>());
        if (!cat) {
            throw DataError("labels line " + std::to_string(lineno) + ": unknown category");
        }
        Record r{j["triple_id"].get<std::string>(), *cat, std::nullopt};
        if (j.contains("note") && j["note"].is_string()) {
            r.note = j["note"].get<std::string>();
        }
        out.push_back(std::move(r));
    }
    return out;
}

SessionResult run_session(std::span<const Triple> triples, const SessionOptions &opts,
                          std::istream &in, std::ostream &out)
{
    std::vector<const Triple *> pool;
    for (const auto &t : triples) {
        if (!opts.valid_only || t.valid) {
            pool.push_back(&t);
        }
    }

    std::unordered_map<std::string, Record> existing;
    if (!opts.labels.empty() && std::filesystem::exists(opts.labels)) {
        std::ifstream lin(opts.labels);
        for (auto &r : read_records(lin)) {
            existing[r.triple_id] = std::move(r);
        }
    }
    std::ofstream labels_out;
    if (!opts.labels.empty()) {
        labels_out.open(opts.labels, std::ios::app);
        if (!labels_out) {
            throw IoError("cannot open labels file " + opts.labels.string());
        }
    }

    SessionResult result;
    const auto order = sample_indices(pool.size(), opts.sample_size, opts.seed);
    result.sampled = order.size();
    std::vector<Record> labeled;
    bool quit = false;
    for (std::size_t pos = 0; pos < order.size() && !quit; ++pos) {
        const auto &t = *pool[order[pos]];
        if (auto it = existing.find(t.triple_id); it != existing.end()) {
            labeled.push_back(it->second);
            continue;
        }
        out << "\n[" << (pos + 1) << "/" << order.size() << "] " << t.triple_id << "\n"
            << "QUERY: " << t.query << "\n\n"
            << "RELEVANT?    " << t.positive_text << "\n\n"
            << "NONRELEVANT? " << t.negative_text << "\n\n"
            << "1 both_correct  2 relevance_wrong  3 nonrelevance_wrong  4 both_wrong  "
               "5 underspecified  q quit\n> "
            << std::flush;
        while (true) {
            std::string line;
            if (!std::getline(in, line)) {
                quit = true;
                break;
            }
            auto answer = text::trim(line);
            if (answer == "q" || answer == "quit") {
                quit = true;
                break;
            }
            const auto sp = answer.find_first_of(" \t");
            auto cat = parse_category(answer.substr(0, sp));
            if (!cat) {
                out << "unrecognized answer, try again\n> " << std::flush;
                continue;
            }
            Record r{t.triple_id, *cat, std::nullopt};
            if (sp != std::string_view::npos) {
                auto note = text::trim(answer.substr(sp));
                if (!note.empty()) {
                    r.note = std::string(note);
                }
            }
            if (labels_out.is_open()) {
                write_record(labels_out, r);
                labels_out.flush();
            }
            labeled.push_back(std::move(r));
            ++result.labeled_now;
            break;
        }
    }
    result.completed = !quit && labeled.size() == order.size();
    result.report = summarize(labeled);
    return result;
}

} // namespace clirgen::assess
