#pragma once

// Small text helpers shared across modules. Everything here treats input as
// UTF-8; malformed bytes decode to U+FFFD.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace amar::text {

std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);

bool is_unicode_space(char32_t c) noexcept;

/// Lowercases ASCII and the Latin-1 / Latin Extended-A upper-case letters.
char32_t fold_case(char32_t c) noexcept;

std::string trim(std::string_view s);

/// Trimmed and case-folded, the form used for name comparisons.
std::u32string normalize_name(std::string_view s);

/// Splits on Unicode whitespace. Empty input gives an empty list.
std::vector<std::string> split_whitespace(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string to_lower_ascii(std::string_view s);

/// Removes one surrounding markdown code fence (```json ... ```) if present.
std::string strip_code_fence(std::string_view raw);

/// Hex-encoded SHA-256.
std::string sha256_hex(std::string_view data);

/// First eight bytes of SHA-256, big-endian.
std::uint64_t hash64(std::string_view data);

std::string base64_encode(std::string_view data);

/// "%.17g" formatting; round-trips every finite double.
std::string format_double17(double v);

std::string format_fixed(double v, int decimals);

}  // namespace amar::text
