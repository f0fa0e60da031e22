#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace scenkit::util {

// ---------------------------------------------------------------------------
// string helpers
// ---------------------------------------------------------------------------

std::string trim(std::string_view s);

/// Split on a single delimiter character; keeps empty fields.
std::vector<std::string> split(std::string_view s, char delim);

/// Split on runs of whitespace; drops empty fields.
std::vector<std::string> split_ws(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool starts_with(std::string_view s, std::string_view prefix);
bool contains(std::string_view s, std::string_view needle);

/// Escapes tab, newline, carriage return and backslash for one-line records.
std::string escape_field(std::string_view s);
std::string unescape_field(std::string_view s);

// ---------------------------------------------------------------------------
// formatting
// ---------------------------------------------------------------------------

/// Shortest decimal form that round-trips a double (printf %.17g trimmed).
std::string format_double(double v);

// ---------------------------------------------------------------------------
// base64
// ---------------------------------------------------------------------------

std::string base64_encode(const std::uint8_t* data, std::size_t len);
std::string base64_encode(std::string_view s);
std::vector<std::uint8_t> base64_decode(std::string_view s);

// ---------------------------------------------------------------------------
// content hashing (non-cryptographic pin for manifests/fixtures)
// ---------------------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view s);
std::string fnv1a64_hex(std::string_view s);

// ---------------------------------------------------------------------------
// file io
// ---------------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace scenkit::util
