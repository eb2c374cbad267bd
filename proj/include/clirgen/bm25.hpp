#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clirgen/corpus.hpp"

namespace clirgen {

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;
};

struct ScoredHit {
    std::uint32_t ordinal = 0; // position of the passage in the indexed sequence
    std::string passage_id;
    double score = 0.0;
    std::size_t rank = 0; // 1-based
};

/// Immutable in-memory inverted index over passages. Safe to share between
/// threads once built.
///
/// Scoring is Okapi BM25 with idf(t) = max(0, ln((N - df + 0.5) / (df + 0.5) + 1)).
/// Query terms are deduplicated and weighted by their query frequency; they
/// are processed in sorted order so scores do not depend on query term order.
class Bm25Index {
public:
    struct Posting {
        std::uint32_t ordinal;
        std::uint32_t tf;
    };

    static constexpr std::string_view analyzer_name = "segment+casefold+trim-punct";

    Bm25Index() = default;

    /// Throws ConfigError on duplicate passage ids.
    static Bm25Index build(std::span<const Passage> passages, Bm25Params params = {});

    std::vector<ScoredHit> search(std::string_view query, std::size_t k) const;

    /// BM25 score of `query` against a single indexed passage. Bit-identical
    /// to the score search() would report for it.
    double score(std::string_view query, std::uint32_t ordinal) const;

    /// One search per query, run with OpenMP across queries.
    std::vector<std::vector<ScoredHit>> search_batch(std::span<const std::string> queries,
                                                     std::size_t k) const;
    std::vector<std::vector<ScoredHit>> search_batch_serial(std::span<const std::string> queries,
                                                            std::size_t k) const;

    std::size_t passage_count() const { return ids_.size(); }
    double avg_doc_len() const { return avg_doc_len_; }
    std::uint32_t doc_length(std::uint32_t ordinal) const { return lengths_.at(ordinal); }
    const std::string &passage_id(std::uint32_t ordinal) const { return ids_.at(ordinal); }
    std::optional<std::uint32_t> find(std::string_view passage_id) const;
    std::size_t term_count() const { return terms_.size(); }
    std::size_t df(std::string_view term) const;
    double idf(std::string_view term) const;
    std::span<const Posting> postings(std::string_view term) const;
    const Bm25Params &params() const { return params_; }

    void save(std::ostream &out) const;
    static Bm25Index load(std::istream &in);

private:
    struct QueryTerm {
        std::uint32_t term;
        std::uint32_t qtf;
    };

    std::vector<QueryTerm> prepare(std::string_view query) const;
    double term_weight(std::uint32_t tf, std::uint32_t ordinal) const;
    void finalize();

    Bm25Params params_;
    std::vector<std::string> ids_;
    std::vector<std::uint32_t> lengths_;
    std::vector<double> length_norm_; // k1 * (1 - b + b * dl / avgdl)
    std::unordered_map<std::string, std::uint32_t> id_lookup_;
    std::vector<std::string> terms_;
    std::unordered_map<std::string, std::uint32_t> term_lookup_;
    std::vector<std::vector<Posting>> postings_;
    std::vector<double> idf_;
    double avg_doc_len_ = 0.0;
};

} // namespace clirgen
