#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace puo::text {

/// Decodes UTF-8 into codepoints. Throws EncodingFailure on malformed input
/// (overlong forms, surrogates, truncated sequences).
std::vector<char32_t> decode_utf8(std::string_view s);

std::string encode_utf8(std::span<const char32_t> cps);

bool is_space(char32_t cp);

/// Punctuation and symbol codepoints stripped from token edges.
bool is_strippable(char32_t cp);

/// Lowercases Latin-script codepoints (ASCII, Latin-1 Supplement, Latin
/// Extended-A). Other scripts pass through unchanged.
char32_t to_lower(char32_t cp);

/// Canonical composition for the Latin combining sequences that occur in the
/// supported languages (grave, acute, circumflex, tilde, macron, diaeresis,
/// caron over ASCII letters). Not a full Unicode NFC.
void compose_nfc(std::vector<char32_t>& cps);

/// NFC + lowercase, UTF-8 in and out.
std::string normalize(std::string_view s);

}  // namespace puo::text
