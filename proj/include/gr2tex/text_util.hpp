#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gr2tex {

// ASCII whitespace only.
std::string_view trim(std::string_view text);
std::vector<std::string_view> split_lines(std::string_view text);
std::vector<std::string_view> split_on(std::string_view text, char sep);
bool starts_with_icase(std::string_view text, std::string_view prefix);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// UTF-8 decoding to Unicode scalar values. Malformed bytes decode to
/// U+FFFD one byte at a time so that decoding is total.
std::u32string decode_utf8(std::string_view text);
std::string encode_utf8(char32_t cp);
std::string encode_utf8(std::u32string_view text);

/// Splits UTF-8 into code-point substrings (malformed bytes kept raw).
std::vector<std::string_view> utf8_chars(std::string_view text);

std::uint64_t fnv1a64(std::string_view bytes);

// Value of an environment variable, or `fallback` when unset.
std::string env_or(const char* name, std::string_view fallback = {});

}  // namespace gr2tex
