#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace alignsim {

using json = nlohmann::ordered_json;

// Stable 64-bit FNV-1a; std::hash is not stable across implementations.
std::uint64_t fnv1a64(std::string_view text);

std::uint64_t splitmix64(std::uint64_t x);

// Named substream of a master seed: derive_seed(seed, "persona") etc.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, std::string_view delimiter);
std::string join(std::span<const std::string> parts, std::string_view sep);
std::string to_lower(std::string_view s);

// Fixed-point formatting with `decimals` digits after the point.
std::string format_fixed(double value, int decimals);

bool is_valid_utf8(std::string_view s);
// Returns `s` unchanged when it is valid UTF-8, else transcodes it from Latin-1.
std::string ensure_utf8(std::string_view s);
// Decodes UTF-8 into code points; invalid bytes map to U+FFFD.
std::u32string decode_utf8(std::string_view s);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::vector<json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, std::span<const json> records);

// Lowercase hex SHA-256 of the file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace alignsim
