// SPDX-License-Identifier: Apache-2.0
#include "nextloc/rng.hpp"

#include <algorithm>
#include <numeric>

namespace nextloc {

SeededRng SeededRng::derived(std::uint64_t seed, std::string_view label) {
    // FNV-1a over the label, mixed with the seed through splitmix64.
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::uint64_t z = seed ^ h;
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return SeededRng(z);
}

std::uint64_t SeededRng::below(std::uint64_t bound) {
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % bound;
}

double SeededRng::unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::vector<std::size_t> SeededRng::sample_indices(std::size_t n, std::size_t count) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (count >= n) return idx;
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < count; ++i) {
        std::swap(idx[i], idx[i + below(n - i)]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace nextloc
