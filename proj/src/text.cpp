#include "clirgen/text.hpp"

#include <cstdint>
#include <cstdio>

namespace clirgen::text {

std::u32string decode_utf8(std::string_view s)
{
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        auto c = static_cast<unsigned char>(s[i]);
        char32_t cp = 0;
        std::size_t extra = 0;
        if (c < 0x80) {
            cp = c;
        } else if ((c & 0xE0) == 0xC0) {
            cp = c & 0x1F;
            extra = 1;
        } else if ((c & 0xF0) == 0xE0) {
            cp = c & 0x0F;
            extra = 2;
        } else if ((c & 0xF8) == 0xF0) {
            cp = c & 0x07;
            extra = 3;
        } else {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        bool ok = i + extra < s.size();
        for (std::size_t k = 1; ok && k <= extra; ++k) {
            auto cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (cc & 0x3F);
        }
        if (!ok) {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += extra + 1;
    }
    return out;
}

std::string encode_utf8(std::u32string_view s)
{
    std::string out;
    out.reserve(s.size());
    for (char32_t cp : s) {
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }
    return out;
}

std::size_t code_point_length(std::string_view s)
{
    return decode_utf8(s).size();
}

bool is_space(char32_t c)
{
    switch (c) {
    case U' ': case U'\t': case U'\n': case U'\r': case U'\v': case U'\f':
    case 0x00A0: case 0x1680: case 0x2028: case 0x2029: case 0x202F:
    case 0x205F: case 0x3000:
        return true;
    default:
        return c >= 0x2000 && c <= 0x200A;
    }
}

bool is_punct(char32_t c)
{
    if (c < 0x80) {
        return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60)
               || (c >= 0x7B && c <= 0x7E);
    }
    return (c >= 0x00A1 && c <= 0x00BF && c != 0x00AA && c != 0x00BA)
           || (c >= 0x2010 && c <= 0x205E) || (c >= 0x3001 && c <= 0x303F)
           || (c >= 0xFF01 && c <= 0xFF0F) || (c >= 0xFF1A && c <= 0xFF20)
           || (c >= 0xFF3B && c <= 0xFF40) || (c >= 0xFF5B && c <= 0xFF65) || c == 0x060C
           || c == 0x061B || c == 0x061F || (c >= 0x066A && c <= 0x066D) || c == 0x06D4
           || c == 0x0964 || c == 0x0965;
}

bool is_cjk(char32_t c)
{
    return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF)
           || (c >= 0x20000 && c <= 0x2EBEF) || (c >= 0xF900 && c <= 0xFAFF)
           || (c >= 0x3040 && c <= 0x30FF) || (c >= 0x3100 && c <= 0x312F)
           || (c >= 0xAC00 && c <= 0xD7AF);
}

char32_t fold_case(char32_t c)
{
    if (c >= U'A' && c <= U'Z') {
        return c + 32;
    }
    if (c < 0x80) {
        return c;
    }
    if (c >= 0x00C0 && c <= 0x00DE && c != 0x00D7) {
        return c + 32;
    }
    if ((c >= 0x0100 && c <= 0x012F) || (c >= 0x0132 && c <= 0x0137)
        || (c >= 0x014A && c <= 0x0177)) {
        return (c % 2 == 0) ? c + 1 : c;
    }
    if ((c >= 0x0139 && c <= 0x0148) || (c >= 0x0179 && c <= 0x017E)) {
        return (c % 2 == 1) ? c + 1 : c;
    }
    if (c >= 0x0391 && c <= 0x03A9 && c != 0x03A2) {
        return c + 32;
    }
    if (c >= 0x0410 && c <= 0x042F) {
        return c + 32;
    }
    if (c >= 0x0400 && c <= 0x040F) {
        return c + 80;
    }
    return c;
}

std::vector<TokenSpan> tokenize_spans(std::u32string_view text)
{
    std::vector<TokenSpan> spans;
    std::size_t run_start = 0;
    bool in_run = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char32_t c = text[i];
        if (is_space(c)) {
            if (in_run) {
                spans.push_back({run_start, i});
                in_run = false;
            }
        } else if (is_cjk(c)) {
            if (in_run) {
                spans.push_back({run_start, i});
                in_run = false;
            }
            spans.push_back({i, i + 1});
        } else if (!in_run) {
            run_start = i;
            in_run = true;
        }
    }
    if (in_run) {
        spans.push_back({run_start, text.size()});
    }
    return spans;
}

std::vector<std::string> analyze(std::string_view utf8)
{
    auto cps = decode_utf8(utf8);
    std::vector<std::string> terms;
    for (auto span : tokenize_spans(cps)) {
        auto b = span.begin;
        auto e = span.end;
        while (b < e && is_punct(cps[b])) {
            ++b;
        }
        while (e > b && is_punct(cps[e - 1])) {
            --e;
        }
        if (b == e) {
            continue;
        }
        std::u32string term(cps.begin() + static_cast<std::ptrdiff_t>(b),
                            cps.begin() + static_cast<std::ptrdiff_t>(e));
        for (auto &c : term) {
            c = fold_case(c);
        }
        terms.push_back(encode_utf8(term));
    }
    return terms;
}

std::string collapse_whitespace(std::string_view utf8)
{
    auto cps = decode_utf8(utf8);
    std::u32string out;
    out.reserve(cps.size());
    bool pending_space = false;
    for (char32_t c : cps) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(U' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return encode_utf8(out);
}

std::string trim(std::string_view s)
{
    auto cps = decode_utf8(s);
    std::size_t b = 0;
    std::size_t e = cps.size();
    while (b < e && is_space(cps[b])) {
        ++b;
    }
    while (e > b && is_space(cps[e - 1])) {
        --e;
    }
    return encode_utf8(std::u32string_view(cps).substr(b, e - b));
}

std::string fnv1a_hex(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace clirgen::text
