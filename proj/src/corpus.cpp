#include "clirgen/corpus.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <regex>
#include <unordered_set>

#include <json.hpp>

#include "clirgen/errors.hpp"
#include "clirgen/text.hpp"

namespace clirgen {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string_view to_string(Genre g)
{
    return g == Genre::news ? "news" : "tweet_thread";
}

Genre parse_genre(std::string_view s)
{
    if (s == "news") {
        return Genre::news;
    }
    if (s == "tweet_thread" || s == "tweet") {
        return Genre::tweet_thread;
    }
    throw ConfigError("unknown genre: " + std::string(s));
}

void SegmentConfig::validate() const
{
    if (window_tokens == 0) {
        throw ConfigError("window_tokens must be > 0");
    }
    if (stride_tokens == 0 || stride_tokens > window_tokens) {
        throw ConfigError("stride_tokens must be in (0, window_tokens]");
    }
}

namespace corpus {
namespace {

const std::regex &url_pattern()
{
    static const std::regex re(R"((?:https?://|www\.)[^\s]+|\bt\.co/[^\s]*)",
                               std::regex::ECMAScript | std::regex::icase);
    return re;
}

struct ParsedLine {
    enum class Status { ok, malformed, empty } status = Status::malformed;
    Document doc;
    std::uint64_t urls = 0;
};

ParsedLine parse_line(const std::string &line, Genre genre, std::string_view lang)
{
    ParsedLine out;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        return out;
    }
    auto id = j.find("id");
    auto txt = j.find("text");
    if (id == j.end() || txt == j.end() || !txt->is_string()) {
        return out;
    }
    if (id->is_string()) {
        out.doc.doc_id = id->get<std::string>();
    } else if (id->is_number_integer()) {
        out.doc.doc_id = std::to_string(id->get<long long>());
    } else {
        return out;
    }
    if (out.doc.doc_id.empty()) {
        return out;
    }
    out.doc.lang = std::string(lang);
    out.doc.genre = genre;
    if (auto t = j.find("title"); t != j.end() && t->is_string()) {
        out.doc.title = t->get<std::string>();
    }
    if (auto u = j.find("url"); u != j.end() && u->is_string()) {
        out.doc.source_uri = u->get<std::string>();
    }
    out.doc.text = normalize(txt->get_ref<const std::string &>(), genre, out.urls);
    out.status = out.doc.text.empty() ? ParsedLine::Status::empty : ParsedLine::Status::ok;
    return out;
}

std::vector<std::string> read_lines(std::istream &in)
{
    if (!in) {
        throw IoError("input stream is not readable");
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!text::trim(line).empty()) {
            lines.push_back(std::move(line));
        }
    }
    if (in.bad()) {
        throw IoError("error while reading input stream");
    }
    return lines;
}

IngestResult merge(std::vector<ParsedLine> &parsed)
{
    IngestResult result;
    std::unordered_set<std::string> seen;
    for (auto &p : parsed) {
        ++result.stats.documents_read;
        switch (p.status) {
        case ParsedLine::Status::malformed:
            ++result.stats.records_malformed;
            continue;
        case ParsedLine::Status::empty:
            ++result.stats.documents_dropped;
            continue;
        case ParsedLine::Status::ok:
            break;
        }
        if (!seen.insert(p.doc.doc_id).second) {
            ++result.stats.duplicate_ids;
            continue;
        }
        result.stats.urls_stripped += p.urls;
        result.documents.push_back(std::move(p.doc));
    }
    return result;
}

} // namespace

std::string strip_urls(std::string_view text, std::uint64_t &removed)
{
    std::string s(text);
    const auto &re = url_pattern();
    removed += static_cast<std::uint64_t>(
        std::distance(std::sregex_iterator(s.begin(), s.end(), re), std::sregex_iterator()));
    return std::regex_replace(s, re, "");
}

bool contains_url(std::string_view text)
{
    std::string s(text);
    return std::regex_search(s, url_pattern());
}

std::string normalize(std::string_view raw, Genre genre, std::uint64_t &urls_removed)
{
    if (genre == Genre::tweet_thread) {
        return text::collapse_whitespace(strip_urls(raw, urls_removed));
    }
    return text::trim(raw);
}

IngestResult ingest(std::istream &in, Genre genre, std::string_view lang)
{
    auto lines = read_lines(in);
    std::vector<ParsedLine> parsed(lines.size());
    const auto n = static_cast<std::ptrdiff_t>(lines.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        parsed[static_cast<std::size_t>(i)] =
            parse_line(lines[static_cast<std::size_t>(i)], genre, lang);
    }
    return merge(parsed);
}

IngestResult ingest_serial(std::istream &in, Genre genre, std::string_view lang)
{
    auto lines = read_lines(in);
    std::vector<ParsedLine> parsed;
    parsed.reserve(lines.size());
    for (const auto &line : lines) {
        parsed.push_back(parse_line(line, genre, lang));
    }
    return merge(parsed);
}

std::vector<Passage> segment(const Document &doc, const SegmentConfig &cfg)
{
    cfg.validate();
    auto cps = text::decode_utf8(doc.text);
    auto spans = text::tokenize_spans(cps);
    std::vector<Passage> out;
    const auto n = spans.size();
    for (std::size_t start = 0, ordinal = 0; start < n; start += cfg.stride_tokens, ++ordinal) {
        const auto end = std::min(start + cfg.window_tokens, n);
        const auto b = spans[start].begin;
        const auto e = spans[end - 1].end;
        Passage p;
        p.passage_id = doc.doc_id + "#" + std::to_string(ordinal);
        p.doc_id = doc.doc_id;
        p.lang = doc.lang;
        p.genre = doc.genre;
        p.ordinal = ordinal;
        p.char_offset = b;
        p.text = text::encode_utf8(std::u32string_view(cps).substr(b, e - b));
        p.char_len = e - b;
        p.token_count = end - start;
        out.push_back(std::move(p));
        // Any later window would be contained in this one.
        if (end == n) {
            break;
        }
    }
    return out;
}

std::vector<Passage> segment_all(std::span<const Document> docs, const SegmentConfig &cfg)
{
    cfg.validate();
    std::vector<std::vector<Passage>> per_doc(docs.size());
    const auto n = static_cast<std::ptrdiff_t>(docs.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        per_doc[static_cast<std::size_t>(i)] = segment(docs[static_cast<std::size_t>(i)], cfg);
    }
    std::size_t total = 0;
    for (const auto &v : per_doc) {
        total += v.size();
    }
    std::vector<Passage> out;
    out.reserve(total);
    for (auto &v : per_doc) {
        std::move(v.begin(), v.end(), std::back_inserter(out));
    }
    return out;
}

std::vector<Passage> segment_all_serial(std::span<const Document> docs, const SegmentConfig &cfg)
{
    std::vector<Passage> out;
    for (const auto &d : docs) {
        auto ps = segment(d, cfg);
        std::move(ps.begin(), ps.end(), std::back_inserter(out));
    }
    return out;
}

void write_passages(std::ostream &out, std::span<const Passage> passages)
{
    for (const auto &p : passages) {
        ojson j;
        j["passage_id"] = p.passage_id;
        j["doc_id"] = p.doc_id;
        j["lang"] = p.lang;
        j["genre"] = to_string(p.genre);
        j["ordinal"] = p.ordinal;
        j["char_offset"] = p.char_offset;
        j["char_len"] = p.char_len;
        j["token_count"] = p.token_count;
        j["text"] = p.text;
        out << j.dump() << '\n';
    }
    if (!out) {
        throw IoError("failed to write passages");
    }
}

std::vector<Passage> read_passages(std::istream &in)
{
    if (!in) {
        throw IoError("passage stream is not readable");
    }
    std::vector<Passage> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        try {
            auto j = json::parse(line);
            Passage p;
            p.passage_id = j.at("passage_id").get<std::string>();
            p.doc_id = j.at("doc_id").get<std::string>();
            p.lang = j.value("lang", "");
            p.genre = parse_genre(j.value("genre", "news"));
            p.ordinal = j.value("ordinal", std::size_t{0});
            p.char_offset = j.at("char_offset").get<std::size_t>();
            p.text = j.at("text").get<std::string>();
            p.char_len = text::code_point_length(p.text);
            p.token_count = j.value("token_count", text::tokenize_spans(text::decode_utf8(p.text)).size());
            out.push_back(std::move(p));
        } catch (const json::exception &e) {
            throw DataError("passages line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

} // namespace corpus
} // namespace clirgen
