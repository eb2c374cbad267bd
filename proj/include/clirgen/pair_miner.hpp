#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clirgen/bm25.hpp"
#include "clirgen/corpus.hpp"

namespace clirgen {

enum class PairingMode { news, tweet };

std::string_view to_string(PairingMode m);
PairingMode parse_pairing_mode(std::string_view s);

struct PairingConfig {
    PairingMode mode = PairingMode::news;
    /// Minimum passage length in code points, keyed by language code. A "*"
    /// entry, if present, applies to languages not listed.
    std::map<std::string, std::size_t> min_passage_chars;
    double ratio_threshold = 0.65;
    std::size_t lcs_min_outside_chars = 20;
    double lcs_min_outside_frac = 0.40;
    bool exclude_same_document = true;
    bool unique_pairing = false;
    std::size_t candidate_pool_size = 1000;

    static PairingConfig news_defaults();
    static PairingConfig tweet_defaults();

    /// Throws ConfigError for languages without a length minimum.
    std::size_t min_chars_for(std::string_view lang) const;
    void validate() const;
};

struct PassagePair {
    std::string pair_id;
    PairingMode mode = PairingMode::news;
    Passage positive;
    Passage negative;
    double positive_self_score = 0.0;
    double negative_score = 0.0;
    double score_ratio = 0.0;
    std::optional<std::size_t> lcs_len;
    std::optional<std::string> seed_query_id;
};

struct SeedQuery {
    std::string id;
    std::string text;
};

enum class NoPairReason { none, degenerate_positive, no_qualifying_negative, no_eligible_positive };

struct MiningStats {
    std::uint64_t attempts = 0;
    std::uint64_t pairs = 0;
    std::uint64_t degenerate_positive = 0;
    std::uint64_t no_qualifying_negative = 0;
    std::uint64_t repeated_positive = 0; // news: attempt drew an already-paired positive
    std::uint64_t seeds_no_hits = 0;
    std::uint64_t seeds_no_positive = 0;
    std::uint64_t seeds_no_negative = 0;
};

/// One entry of a ranked candidate list, as seen by negative selection.
struct RankedCandidate {
    std::string doc_id;
    std::size_t char_len = 0;
    std::size_t min_chars = 0;
    double score = 0.0;
};

/// Walk `ranked` in order and return the index of the first candidate that
/// is long enough, scores below `ratio_threshold` relative to `self_score`,
/// is not from `positive_doc`, and whose document has no candidate in the
/// list at or above the threshold.
std::optional<std::size_t> select_news_negative(std::span<const RankedCandidate> ranked,
                                                double self_score, std::string_view positive_doc,
                                                double ratio_threshold);

/// Both passages must keep at least `min_chars` code points and
/// `min_frac` of their length outside their longest common substring.
bool passes_lcs_gate(std::size_t len_a, std::size_t len_b, std::size_t lcs_len,
                     std::size_t min_chars, double min_frac);

/// Positive passages drawn at random; negatives found by issuing the
/// positive's text as a BM25 query. `passages` must be the sequence the
/// index was built from.
class NewsMiner {
public:
    NewsMiner(std::span<const Passage> passages, const Bm25Index &index, PairingConfig cfg);

    /// A single mining attempt. Deterministic in `rng_seed`.
    std::optional<PassagePair> mine_one(std::uint64_t rng_seed, NoPairReason *why = nullptr) const;

    struct Result {
        std::vector<PassagePair> pairs;
        MiningStats stats;
    };

    /// Mine up to `count` pairs with distinct positives, giving up after
    /// `max_attempts`. Attempts are evaluated in parallel blocks and accepted
    /// in attempt order, so the result equals mine_serial().
    Result mine(std::size_t count, std::uint64_t seed, std::size_t max_attempts = 0) const;
    Result mine_serial(std::size_t count, std::uint64_t seed, std::size_t max_attempts = 0) const;

    std::size_t eligible_positive_count() const { return eligible_.size(); }

private:
    std::span<const Passage> passages_;
    const Bm25Index &index_;
    PairingConfig cfg_;
    std::vector<std::uint32_t> eligible_;
};

struct TweetMiningResult {
    std::vector<PassagePair> pairs;
    MiningStats stats;
};

/// For each seed query, the top unused qualifying hit becomes the positive;
/// the negative must also be retrieved by the seed query, pass the LCS gate
/// and score below the ratio threshold against the positive. No passage is
/// used in more than one pair.
TweetMiningResult mine_tweet_pairs(std::span<const Passage> passages, const Bm25Index &index,
                                   std::span<const SeedQuery> seeds, const PairingConfig &cfg);

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

void write_pairs(std::ostream &out, std::span<const PassagePair> pairs);
std::vector<PassagePair> read_pairs(std::istream &in);
std::vector<SeedQuery> read_seed_queries(std::istream &in);

} // namespace clirgen
