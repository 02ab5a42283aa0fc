// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace slotllm {

// Insertion-ordered so slot maps keep first-mention order through serialization.
using json = nlohmann::ordered_json;

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t splitmix64(std::uint64_t x);
/// Order-dependent combination of two 64-bit values.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

std::string sha256_hex(std::string_view data);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Reads a JSON-lines file. Malformed lines raise std::runtime_error naming the
/// 1-based line number. Blank lines are skipped.
std::vector<json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, std::span<const json> records);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::string join(std::span<const std::string> parts, std::string_view sep);
bool starts_with(std::string_view s, std::string_view prefix);

/// Decodes UTF-8 into code points; invalid bytes decode as U+FFFD.
std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);

}  // namespace slotllm
