#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clirgen/validator.hpp"

namespace clirgen::assess {

enum class Category {
    both_correct,       // query fits the positive and not the negative
    relevance_wrong,    // positive does not answer the query
    nonrelevance_wrong, // negative answers the query too
    both_wrong,
    underspecified,     // plausible, but too vague to judge either way
};

inline constexpr std::size_t category_count = 5;

std::string_view to_string(Category c);

/// Accepts the category name or its 1-based menu number.
std::optional<Category> parse_category(std::string_view s);

struct Record {
    std::string triple_id;
    Category category = Category::both_correct;
    std::optional<std::string> note;
};

struct Report {
    std::size_t total = 0;
    std::array<std::size_t, category_count> counts{};
    double strict = 0.0;  // both_correct / total
    double lenient = 0.0; // (both_correct + underspecified) / total

    std::size_t count(Category c) const { return counts[static_cast<std::size_t>(c)]; }
};

Report summarize(std::span<const Record> records);

/// One decimal place with a percent sign, e.g. "67.2%".
std::string format_percent(double fraction);

/// `sample_size` distinct indices into [0, n), in draw order. Deterministic
/// in `seed`. Returns all n indices (shuffled) if sample_size >= n.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t sample_size,
                                        std::uint64_t seed);

void write_record(std::ostream &out, const Record &r);
std::vector<Record> read_records(std::istream &in);

struct SessionOptions {
    std::size_t sample_size = 61;
    std::uint64_t seed = 0;
    std::filesystem::path labels; // appended per answer; existing labels are reused
    bool valid_only = true;
};

struct SessionResult {
    Report report;
    std::size_t sampled = 0;
    std::size_t labeled_now = 0;
    bool completed = false; // false if the assessor quit early
};

/// Terminal labeling loop. Shows each sampled triple on `out` and reads one
/// answer line from `in`: a category (name or 1-5), optionally followed by a
/// free-text note. "q" or end of input stops the session; labels given so far
/// stay in the labels file and a later session with the same seed resumes.
SessionResult run_session(std::span<const Triple> triples, const SessionOptions &opts,
                          std::istream &in, std::ostream &out);

} // namespace clirgen::assess
