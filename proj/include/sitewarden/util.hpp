#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sitewarden {

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);
std::string sha256_hex(const std::vector<std::uint8_t>& data);

std::string base64_encode(const std::uint8_t* data, std::size_t len);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);
// Writes to <path>.tmp then renames, so readers never see a half-written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Parses a JSON Lines file, skipping blank lines. The callback receives the
// 1-based line number and the parsed object.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const nlohmann::json&)>& fn);

void append_jsonl_line(const std::filesystem::path& path, const nlohmann::json& record);

std::string iso8601_utc_now();

std::string to_lower(std::string_view text);
std::string trim(std::string_view text);

// Runs fn(0..n-1) on up to `workers` threads. fn must handle its own errors;
// an escaped exception aborts the process.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace sitewarden
