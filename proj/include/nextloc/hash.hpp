// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

namespace nextloc {

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// SHA-256 of a whole file, streamed. Throws DataError if unreadable.
std::string sha256_file(const std::string& path);

/// First 16 hex chars of sha256_hex; used for short stable identifiers.
std::string short_hash(std::string_view data);

}  // namespace nextloc
