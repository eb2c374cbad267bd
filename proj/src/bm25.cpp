#include "clirgen/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "clirgen/errors.hpp"
#include "clirgen/text.hpp"

namespace clirgen {
namespace {

constexpr std::string_view kMagic = "clirgen-bm25";
constexpr int kFormatVersion = 1;

std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

Bm25Index Bm25Index::build(std::span<const Passage> passages, Bm25Params params)
{
    Bm25Index idx;
    idx.params_ = params;
    idx.ids_.reserve(passages.size());
    idx.lengths_.reserve(passages.size());
    for (std::uint32_t ord = 0; ord < passages.size(); ++ord) {
        const auto &p = passages[ord];
        if (!idx.id_lookup_.emplace(p.passage_id, ord).second) {
            throw ConfigError("duplicate passage_id: " + p.passage_id);
        }
        idx.ids_.push_back(p.passage_id);
        auto terms = text::analyze(p.text);
        idx.lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
        std::sort(terms.begin(), terms.end());
        for (std::size_t i = 0; i < terms.size();) {
            std::size_t j = i;
            while (j < terms.size() && terms[j] == terms[i]) {
                ++j;
            }
            auto [it, inserted] =
                idx.term_lookup_.emplace(terms[i], static_cast<std::uint32_t>(idx.terms_.size()));
            if (inserted) {
                idx.terms_.push_back(terms[i]);
                idx.postings_.emplace_back();
            }
            idx.postings_[it->second].push_back({ord, static_cast<std::uint32_t>(j - i)});
            i = j;
        }
    }
    idx.finalize();
    return idx;
}

void Bm25Index::finalize()
{
    const auto n = static_cast<double>(ids_.size());
    double total = 0.0;
    for (auto len : lengths_) {
        total += len;
    }
    avg_doc_len_ = ids_.empty() ? 0.0 : total / n;
    length_norm_.resize(lengths_.size());
    for (std::size_t i = 0; i < lengths_.size(); ++i) {
        const double rel = avg_doc_len_ > 0.0 ? lengths_[i] / avg_doc_len_ : 0.0;
        length_norm_[i] = params_.k1 * (1.0 - params_.b + params_.b * rel);
    }
    idf_.resize(postings_.size());
    for (std::size_t t = 0; t < postings_.size(); ++t) {
        const auto df = static_cast<double>(postings_[t].size());
        idf_[t] = std::max(0.0, std::log((n - df + 0.5) / (df + 0.5) + 1.0));
    }
}

double Bm25Index::term_weight(std::uint32_t tf, std::uint32_t ordinal) const
{
    const double f = tf;
    return f * (params_.k1 + 1.0) / (f + length_norm_[ordinal]);
}

std::vector<Bm25Index::QueryTerm> Bm25Index::prepare(std::string_view query) const
{
    auto terms = text::analyze(query);
    std::sort(terms.begin(), terms.end());
    std::vector<QueryTerm> out;
    for (std::size_t i = 0; i < terms.size();) {
        std::size_t j = i;
        while (j < terms.size() && terms[j] == terms[i]) {
            ++j;
        }
        if (auto it = term_lookup_.find(terms[i]); it != term_lookup_.end()) {
            out.push_back({it->second, static_cast<std::uint32_t>(j - i)});
        }
        i = j;
    }
    return out;
}

std::vector<ScoredHit> Bm25Index::search(std::string_view query, std::size_t k) const
{
    if (k == 0) {
        throw ConfigError("search: k must be >= 1");
    }
    auto qterms = prepare(query);
    if (qterms.empty()) {
        return {};
    }
    std::vector<double> acc(ids_.size(), 0.0);
    std::vector<std::uint32_t> touched;
    for (const auto &qt : qterms) {
        const double w = qt.qtf * idf_[qt.term];
        for (const auto &p : postings_[qt.term]) {
            if (acc[p.ordinal] == 0.0) {
                touched.push_back(p.ordinal);
            }
            acc[p.ordinal] += w * term_weight(p.tf, p.ordinal);
        }
    }
    std::vector<ScoredHit> hits;
    hits.reserve(touched.size());
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (auto ord : touched) {
        if (acc[ord] > 0.0) {
            hits.push_back({ord, ids_[ord], acc[ord], 0});
        }
    }
    auto better = [](const ScoredHit &a, const ScoredHit &b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.passage_id < b.passage_id;
    };
    const auto keep = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                      better);
    hits.resize(keep);
    for (std::size_t i = 0; i < hits.size(); ++i) {
        hits[i].rank = i + 1;
    }
    return hits;
}

double Bm25Index::score(std::string_view query, std::uint32_t ordinal) const
{
    if (ordinal >= ids_.size()) {
        throw ConfigError("score: ordinal out of range");
    }
    double s = 0.0;
    for (const auto &qt : prepare(query)) {
        const auto &plist = postings_[qt.term];
        auto it = std::lower_bound(plist.begin(), plist.end(), ordinal,
                                   [](const Posting &p, std::uint32_t o) { return p.ordinal < o; });
        if (it != plist.end() && it->ordinal == ordinal) {
            s += qt.qtf * idf_[qt.term] * term_weight(it->tf, ordinal);
        }
    }
    return s;
}

std::vector<std::vector<ScoredHit>> Bm25Index::search_batch(std::span<const std::string> queries,
                                                            std::size_t k) const
{
    std::vector<std::vector<ScoredHit>> out(queries.size());
    const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = search(queries[static_cast<std::size_t>(i)], k);
    }
    return out;
}

std::vector<std::vector<ScoredHit>>
Bm25Index::search_batch_serial(std::span<const std::string> queries, std::size_t k) const
{
    std::vector<std::vector<ScoredHit>> out;
    out.reserve(queries.size());
    for (const auto &q : queries) {
        out.push_back(search(q, k));
    }
    return out;
}

std::optional<std::uint32_t> Bm25Index::find(std::string_view passage_id) const
{
    auto it = id_lookup_.find(std::string(passage_id));
    if (it == id_lookup_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::size_t Bm25Index::df(std::string_view term) const
{
    auto it = term_lookup_.find(std::string(term));
    return it == term_lookup_.end() ? 0 : postings_[it->second].size();
}

double Bm25Index::idf(std::string_view term) const
{
    auto it = term_lookup_.find(std::string(term));
    return it == term_lookup_.end() ? 0.0 : idf_[it->second];
}

std::span<const Bm25Index::Posting> Bm25Index::postings(std::string_view term) const
{
    auto it = term_lookup_.find(std::string(term));
    if (it == term_lookup_.end()) {
        return {};
    }
    return postings_[it->second];
}

// Text format, one record per line:
//   clirgen-bm25 <version>
//   analyzer <name>
//   k1 <value>
//   b <value>
//   passages <N>
//   <length>\t<passage_id>          (N lines, in ordinal order)
//   terms <T>
//   <term>\t<ordinal>:<tf> ...      (T lines, sorted by term)
void Bm25Index::save(std::ostream &out) const
{
    out << kMagic << ' ' << kFormatVersion << '\n';
    out << "analyzer " << analyzer_name << '\n';
    out << "k1 " << format_double(params_.k1) << '\n';
    out << "b " << format_double(params_.b) << '\n';
    out << "passages " << ids_.size() << '\n';
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (ids_[i].find_first_of("\t\n") != std::string::npos) {
            throw DataError("passage id contains tab or newline: " + ids_[i]);
        }
        out << lengths_[i] << '\t' << ids_[i] << '\n';
    }
    std::map<std::string_view, std::uint32_t> sorted;
    for (std::uint32_t t = 0; t < terms_.size(); ++t) {
        sorted.emplace(terms_[t], t);
    }
    out << "terms " << sorted.size() << '\n';
    for (const auto &[term, t] : sorted) {
        out << term << '\t';
        bool first = true;
        for (const auto &p : postings_[t]) {
            out << (first ? "" : " ") << p.ordinal << ':' << p.tf;
            first = false;
        }
        out << '\n';
    }
    if (!out) {
        throw IoError("failed to write index");
    }
}

Bm25Index Bm25Index::load(std::istream &in)
{
    auto fail = [](const std::string &what) { return DataError("index file: " + what); };
    std::string line;
    auto next = [&]() -> std::string & {
        if (!std::getline(in, line)) {
            throw fail("unexpected end of file");
        }
        return line;
    };
    auto keyed = [&](std::string_view key) {
        auto &l = next();
        if (l.rfind(key, 0) != 0 || l.size() <= key.size() || l[key.size()] != ' ') {
            throw fail("expected '" + std::string(key) + "'");
        }
        return l.substr(key.size() + 1);
    };

    Bm25Index idx;
    auto header = keyed(kMagic);
    if (std::stoi(header) != kFormatVersion) {
        throw fail("unsupported version " + header);
    }
    if (keyed("analyzer") != analyzer_name) {
        throw fail("analyzer mismatch");
    }
    idx.params_.k1 = std::stod(keyed("k1"));
    idx.params_.b = std::stod(keyed("b"));
    const auto n = std::stoull(keyed("passages"));
    for (std::uint32_t ord = 0; ord < n; ++ord) {
        auto &l = next();
        auto tab = l.find('\t');
        if (tab == std::string::npos) {
            throw fail("bad passage line");
        }
        idx.lengths_.push_back(static_cast<std::uint32_t>(std::stoul(l.substr(0, tab))));
        idx.ids_.push_back(l.substr(tab + 1));
        if (!idx.id_lookup_.emplace(idx.ids_.back(), ord).second) {
            throw fail("duplicate passage id " + idx.ids_.back());
        }
    }
    const auto nterms = std::stoull(keyed("terms"));
    for (std::uint32_t t = 0; t < nterms; ++t) {
        auto &l = next();
        auto tab = l.find('\t');
        if (tab == std::string::npos) {
            throw fail("bad term line");
        }
        idx.terms_.push_back(l.substr(0, tab));
        idx.term_lookup_.emplace(idx.terms_.back(), t);
        auto &plist = idx.postings_.emplace_back();
        std::istringstream ps(l.substr(tab + 1));
        std::string item;
        while (ps >> item) {
            auto colon = item.find(':');
            if (colon == std::string::npos) {
                throw fail("bad posting " + item);
            }
            auto ord = static_cast<std::uint32_t>(std::stoul(item.substr(0, colon)));
            if (ord >= n) {
                throw fail("posting references unknown passage");
            }
            plist.push_back({ord, static_cast<std::uint32_t>(std::stoul(item.substr(colon + 1)))});
        }
    }
    idx.finalize();
    return idx;
}

} // namespace clirgen
