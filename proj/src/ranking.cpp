// SPDX-License-Identifier: Apache-2.0
#include "nextloc/ranking.hpp"

#include <algorithm>
#include <map>

namespace nextloc {
namespace {

struct Tally {
    std::size_t count = 0;
    std::size_t last_pos = 0;
};

std::vector<std::string> top(const std::map<std::string, Tally>& tallies, std::size_t limit) {
    std::vector<std::pair<std::string, Tally>> items(tallies.begin(), tallies.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second.count != b.second.count) return a.second.count > b.second.count;
        return a.second.last_pos > b.second.last_pos;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < items.size() && out.size() < limit; ++i) out.push_back(items[i].first);
    return out;
}

}  // namespace

std::vector<std::string> rank_by_frequency(const std::vector<Visit>& sequence, std::size_t limit) {
    std::map<std::string, Tally> tallies;
    for (std::size_t i = 0; i < sequence.size(); ++i) {
        auto& t = tallies[sequence[i].location_id];
        ++t.count;
        t.last_pos = i;
    }
    return top(tallies, limit);
}

std::vector<std::string> rank_by_recency(const std::vector<Visit>& sequence, std::size_t limit) {
    std::vector<std::string> out;
    for (auto it = sequence.rbegin(); it != sequence.rend() && out.size() < limit; ++it) {
        if (std::find(out.begin(), out.end(), it->location_id) == out.end()) out.push_back(it->location_id);
    }
    return out;
}

std::vector<std::string> rank_by_markov1(const std::vector<Visit>& sequence, std::size_t limit) {
    if (sequence.size() < 2) return rank_by_frequency(sequence, limit);
    const auto& current = sequence.back().location_id;
    std::map<std::string, Tally> next;
    for (std::size_t i = 0; i + 1 < sequence.size(); ++i) {
        if (sequence[i].location_id != current) continue;
        auto& t = next[sequence[i + 1].location_id];
        ++t.count;
        t.last_pos = i;
    }
    auto out = top(next, limit);
    for (const auto& id : rank_by_frequency(sequence, sequence.size())) {
        if (out.size() >= limit) break;
        if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
    }
    return out;
}

}  // namespace nextloc
