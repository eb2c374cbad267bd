#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace clirgen::text {

/// Decode UTF-8 into code points. Invalid bytes decode to U+FFFD.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);

/// Number of code points in a UTF-8 string.
std::size_t code_point_length(std::string_view s);

bool is_space(char32_t c);
bool is_punct(char32_t c);

/// Han ideographs, kana and Hangul syllables: each code point is its own token.
bool is_cjk(char32_t c);

/// Simple case folding for Latin, Greek and Cyrillic. Other scripts are unchanged.
char32_t fold_case(char32_t c);

/// A token as a half-open span of code-point offsets into the decoded text.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Segmentation tokenizer: runs of non-space code points for space-delimited
/// scripts, and one token per CJK code point.
std::vector<TokenSpan> tokenize_spans(std::u32string_view text);

/// Analyzer used by the index and the lexical scorer: segmentation tokens,
/// case-folded, with leading/trailing punctuation trimmed. Tokens that are
/// pure punctuation are dropped.
std::vector<std::string> analyze(std::string_view utf8);

/// Collapse whitespace runs to a single ASCII space and trim both ends.
std::string collapse_whitespace(std::string_view utf8);

std::string trim(std::string_view s);

/// 64-bit FNV-1a, hex encoded. Stable across platforms.
std::string fnv1a_hex(std::string_view s);

} // namespace clirgen::text
