#include "clirgen/lcs.hpp"

#include <algorithm>
#include <unordered_map>
#include <vector>

#include "clirgen/text.hpp"

namespace clirgen {
namespace {

class SuffixAutomaton {
public:
    explicit SuffixAutomaton(std::u32string_view s)
    {
        states_.reserve(2 * s.size() + 1);
        states_.push_back({});
        for (char32_t c : s) {
            extend(c);
        }
    }

    /// Longest substring of the automaton's text that also occurs in `t`.
    std::size_t longest_match(std::u32string_view t) const
    {
        int v = 0;
        std::size_t len = 0;
        std::size_t best = 0;
        for (char32_t c : t) {
            while (v != 0 && !states_[v].next.contains(c)) {
                v = states_[v].link;
                len = states_[v].len;
            }
            if (auto it = states_[v].next.find(c); it != states_[v].next.end()) {
                v = it->second;
                ++len;
            }
            best = std::max(best, len);
        }
        return best;
    }

private:
    struct State {
        std::size_t len = 0;
        int link = -1;
        std::unordered_map<char32_t, int> next;
    };

    void extend(char32_t c)
    {
        const int cur = static_cast<int>(states_.size());
        states_.push_back({states_[last_].len + 1, -1, {}});
        int p = last_;
        while (p != -1 && !states_[p].next.contains(c)) {
            states_[p].next[c] = cur;
            p = states_[p].link;
        }
        if (p == -1) {
            states_[cur].link = 0;
        } else {
            const int q = states_[p].next[c];
            if (states_[p].len + 1 == states_[q].len) {
                states_[cur].link = q;
            } else {
                const int clone = static_cast<int>(states_.size());
                State copy = states_[q];
                copy.len = states_[p].len + 1;
                states_.push_back(std::move(copy));
                while (p != -1) {
                    auto it = states_[p].next.find(c);
                    if (it == states_[p].next.end() || it->second != q) {
                        break;
                    }
                    it->second = clone;
                    p = states_[p].link;
                }
                states_[q].link = clone;
                states_[cur].link = clone;
            }
        }
        last_ = cur;
    }

    std::vector<State> states_;
    int last_ = 0;
};

} // namespace

std::size_t longest_common_substring(std::u32string_view a, std::u32string_view b)
{
    if (a.empty() || b.empty()) {
        return 0;
    }
    // Build over the shorter string.
    if (b.size() < a.size()) {
        std::swap(a, b);
    }
    return SuffixAutomaton(a).longest_match(b);
}

std::size_t longest_common_substring_utf8(std::string_view a, std::string_view b)
{
    return longest_common_substring(text::decode_utf8(a), text::decode_utf8(b));
}

} // namespace clirgen
