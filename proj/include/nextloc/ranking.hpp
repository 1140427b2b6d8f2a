// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nextloc/ingest.hpp"

namespace nextloc {

inline constexpr std::size_t kTopK = 5;

/// Distinct ids by visit count, descending; ties go to the id seen most recently.
std::vector<std::string> rank_by_frequency(const std::vector<Visit>& sequence, std::size_t limit = kTopK);

/// Distinct ids by last occurrence, most recent first.
std::vector<std::string> rank_by_recency(const std::vector<Visit>& sequence, std::size_t limit = kTopK);

/// Destinations of order-1 transitions out of the final location, by count
/// (ties to the most recent transition), topped up from rank_by_frequency.
std::vector<std::string> rank_by_markov1(const std::vector<Visit>& sequence, std::size_t limit = kTopK);

}  // namespace nextloc
