// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace nextloc {

using Json = nlohmann::json;

/// Reads the whole file. Throws DataError naming the path if it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Appends one line (newline added) and flushes.
void append_line(const std::filesystem::path& path, const std::string& line);

/// Parses a JSON-lines file; blank lines are skipped. Throws DataError on a bad line.
std::vector<Json> read_jsonl(const std::filesystem::path& path);

/// Serialises records one per line with a stable key order.
std::string to_jsonl(const std::vector<Json>& records);

}  // namespace nextloc
