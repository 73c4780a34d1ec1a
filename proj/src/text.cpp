#include "puo/text.hpp"

#include <array>

#include "puo/errors.hpp"

namespace puo::text {

std::vector<char32_t> decode_utf8(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        char32_t cp = 0;
        std::size_t len = 0;
        if (b0 < 0x80) {
            cp = b0;
            len = 1;
        } else if ((b0 & 0xE0) == 0xC0) {
            cp = b0 & 0x1F;
            len = 2;
        } else if ((b0 & 0xF0) == 0xE0) {
            cp = b0 & 0x0F;
            len = 3;
        } else if ((b0 & 0xF8) == 0xF0) {
            cp = b0 & 0x07;
            len = 4;
        } else {
            throw EncodingFailure("invalid UTF-8 lead byte");
        }
        if (i + len > s.size()) throw EncodingFailure("truncated UTF-8 sequence");
        for (std::size_t k = 1; k < len; ++k) {
            const auto b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80) throw EncodingFailure("invalid UTF-8 continuation byte");
            cp = (cp << 6) | (b & 0x3F);
        }
        static constexpr char32_t kMinByLen[5] = {0, 0, 0x80, 0x800, 0x10000};
        if (len > 1 && cp < kMinByLen[len]) throw EncodingFailure("overlong UTF-8 sequence");
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
            throw EncodingFailure("invalid UTF-8 codepoint");
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::string encode_utf8(std::span<const char32_t> cps) {
    std::string out;
    out.reserve(cps.size());
    for (char32_t cp : cps) {
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

bool is_space(char32_t cp) {
    switch (cp) {
        case U' ': case U'\t': case U'\n': case U'\r': case U'\v': case U'\f':
        case 0x0085: case 0x00A0: case 0x1680:
        case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

bool is_strippable(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= U'!' && cp <= U'/') || (cp >= U':' && cp <= U'@') ||
               (cp >= U'[' && cp <= U'`') || (cp >= U'{' && cp <= U'~');
    }
    switch (cp) {
        case 0x00A1: case 0x00A7: case 0x00AB: case 0x00B6: case 0x00B7:
        case 0x00BB: case 0x00BF:                       // ¡ § « ¶ · » ¿
        case 0x2010: case 0x2011: case 0x2012: case 0x2013: case 0x2014:
        case 0x2015:                                    // hyphens and dashes
        case 0x2018: case 0x2019: case 0x201A: case 0x201B:
        case 0x201C: case 0x201D: case 0x201E: case 0x201F:  // quotes
        case 0x2020: case 0x2021: case 0x2022: case 0x2026:  // † ‡ • …
        case 0x2030: case 0x2032: case 0x2033: case 0x2039: case 0x203A:
        case 0x00B0: case 0x20AC: case 0x00A3: case 0x00A5: case 0x00A2:  // ° € £ ¥ ¢
            return true;
        default:
            return false;
    }
}

char32_t to_lower(char32_t cp) {
    if (cp >= U'A' && cp <= U'Z') return cp + 0x20;
    // Latin-1 Supplement uppercase, excluding the multiplication sign.
    if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) return cp + 0x20;
    // Latin Extended-A alternates upper/lower, with the parity flipping
    // between Ĺ (0x0139) and ŉ (0x0149).
    if (cp >= 0x0100 && cp <= 0x0137) {
        if (cp == 0x0130) return U'i';  // İ
        if (cp == 0x0131) return cp;    // ı is already lowercase
        return (cp % 2 == 0) ? cp + 1 : cp;
    }
    if (cp >= 0x0139 && cp <= 0x0148) return (cp % 2 == 1) ? cp + 1 : cp;
    if (cp >= 0x014A && cp <= 0x0177) return (cp % 2 == 0) ? cp + 1 : cp;
    if (cp == 0x0178) return 0x00FF;  // Ÿ
    if (cp == 0x0179 || cp == 0x017B || cp == 0x017D) return cp + 1;  // Ź Ż Ž
    return cp;
}

namespace {

// (base, combining mark) -> precomposed. Covers the Latin diacritics used by
// the supported languages; anything else is left decomposed.
char32_t compose_pair(char32_t base, char32_t mark) {
    struct Entry { char32_t base, mark, composed; };
    static constexpr std::array<Entry, 46> kTable = {{
        {U'a', 0x0300, 0x00E0}, {U'a', 0x0301, 0x00E1}, {U'a', 0x0302, 0x00E2},
        {U'a', 0x0303, 0x00E3}, {U'a', 0x0308, 0x00E4},
        {U'e', 0x0300, 0x00E8}, {U'e', 0x0301, 0x00E9}, {U'e', 0x0302, 0x00EA},
        {U'e', 0x0308, 0x00EB},
        {U'i', 0x0300, 0x00EC}, {U'i', 0x0301, 0x00ED}, {U'i', 0x0302, 0x00EE},
        {U'i', 0x0308, 0x00EF},
        {U'o', 0x0300, 0x00F2}, {U'o', 0x0301, 0x00F3}, {U'o', 0x0302, 0x00F4},
        {U'o', 0x0303, 0x00F5}, {U'o', 0x0308, 0x00F6},
        {U'u', 0x0300, 0x00F9}, {U'u', 0x0301, 0x00FA}, {U'u', 0x0302, 0x00FB},
        {U'u', 0x0308, 0x00FC},
        {U'n', 0x0303, 0x00F1}, {U'y', 0x0301, 0x00FD}, {U'y', 0x0308, 0x00FF},
        {U'c', 0x030C, 0x010D}, {U's', 0x030C, 0x0161}, {U'z', 0x030C, 0x017E},
        {U'e', 0x030C, 0x011B}, {U'a', 0x0304, 0x0101}, {U'e', 0x0304, 0x0113},
        {U'o', 0x0304, 0x014D}, {U'u', 0x0304, 0x016B}, {U'i', 0x0304, 0x012B},
        {U'A', 0x0300, 0x00C0}, {U'A', 0x0301, 0x00C1}, {U'A', 0x0302, 0x00C2},
        {U'E', 0x0301, 0x00C9}, {U'E', 0x0302, 0x00CA}, {U'I', 0x0301, 0x00CD},
        {U'O', 0x0301, 0x00D3}, {U'O', 0x0302, 0x00D4}, {U'U', 0x0301, 0x00DA},
        {U'C', 0x030C, 0x010C}, {U'S', 0x030C, 0x0160}, {U'Z', 0x030C, 0x017D},
    }};
    for (const auto& e : kTable)
        if (e.base == base && e.mark == mark) return e.composed;
    return 0;
}

}  // namespace

void compose_nfc(std::vector<char32_t>& cps) {
    std::size_t w = 0;
    for (std::size_t r = 0; r < cps.size(); ++r) {
        if (w > 0 && cps[r] >= 0x0300 && cps[r] <= 0x036F) {
            if (char32_t composed = compose_pair(cps[w - 1], cps[r]); composed != 0) {
                cps[w - 1] = composed;
                continue;
            }
        }
        cps[w++] = cps[r];
    }
    cps.resize(w);
}

std::string normalize(std::string_view s) {
    auto cps = decode_utf8(s);
    compose_nfc(cps);
    for (auto& cp : cps) cp = to_lower(cp);
    return encode_utf8(cps);
}

}  // namespace puo::text
