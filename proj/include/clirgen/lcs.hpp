#pragma once

#include <cstddef>
#include <string_view>

namespace clirgen {

/// Length, in code points, of the longest contiguous substring shared by
/// `a` and `b`. Builds a suffix automaton over `a` and streams `b` through
/// it: O(|a| + |b|) expected time.
std::size_t longest_common_substring(std::u32string_view a, std::u32string_view b);

/// UTF-8 convenience overload.
std::size_t longest_common_substring_utf8(std::string_view a, std::string_view b);

} // namespace clirgen
