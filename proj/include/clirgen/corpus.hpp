#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clirgen {

enum class Genre { news, tweet_thread };

std::string_view to_string(Genre g);
Genre parse_genre(std::string_view s);

struct Document {
    std::string doc_id;
    std::string lang;
    Genre genre = Genre::news;
    std::optional<std::string> title;
    std::string text; // normalized
    std::optional<std::string> source_uri;
};

/// A contiguous window of a document's normalized text. Offsets and lengths
/// are in code points.
struct Passage {
    std::string passage_id;
    std::string doc_id;
    std::string lang;
    Genre genre = Genre::news;
    std::size_t ordinal = 0;
    std::size_t char_offset = 0;
    std::string text;
    std::size_t char_len = 0;
    std::size_t token_count = 0;

    bool operator==(const Passage &) const = default;
};

struct CorpusStats {
    std::uint64_t documents_read = 0;
    std::uint64_t documents_dropped = 0; // empty after normalization
    std::uint64_t records_malformed = 0; // unparseable, or missing id/text
    std::uint64_t duplicate_ids = 0;
    std::uint64_t passages_emitted = 0;
    std::uint64_t urls_stripped = 0;
};

struct SegmentConfig {
    std::size_t window_tokens = 180;
    std::size_t stride_tokens = 90;

    void validate() const;
};

namespace corpus {

/// Remove http(s)://, www. and t.co style links. Returns the stripped text
/// and adds the number of removed links to `removed`.
std::string strip_urls(std::string_view text, std::uint64_t &removed);

/// True if `text` contains anything the URL pattern would strip.
bool contains_url(std::string_view text);

/// Normalize one document's raw text for its genre. Tweets lose URLs and
/// have whitespace collapsed; everything is trimmed.
std::string normalize(std::string_view raw, Genre genre, std::uint64_t &urls_removed);

struct IngestResult {
    std::vector<Document> documents;
    CorpusStats stats;
};

/// Read line-delimited JSON records {id, title?, text, url?}. Malformed lines
/// and duplicate ids are skipped and counted. Throws IoError if the stream
/// cannot be read. Normalization runs in parallel; output order is input
/// order either way.
IngestResult ingest(std::istream &in, Genre genre, std::string_view lang);
IngestResult ingest_serial(std::istream &in, Genre genre, std::string_view lang);

/// Slide a window of `window_tokens` over the document in steps of
/// `stride_tokens`, stopping after the first window that reaches the end.
std::vector<Passage> segment(const Document &doc, const SegmentConfig &cfg = {});

/// Segment many documents in parallel. Result is concatenated in document
/// order, identical to segment_all_serial.
std::vector<Passage> segment_all(std::span<const Document> docs, const SegmentConfig &cfg = {});
std::vector<Passage> segment_all_serial(std::span<const Document> docs,
                                        const SegmentConfig &cfg = {});

void write_passages(std::ostream &out, std::span<const Passage> passages);
std::vector<Passage> read_passages(std::istream &in);

} // namespace corpus
} // namespace clirgen
