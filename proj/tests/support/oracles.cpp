// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace oracle {

using nextloc::stops::haversine_m;
using nextloc::stops::LatLon;

std::vector<std::size_t> dbscan(const std::vector<LatLon>& points, double eps_m, std::size_t min_pts) {
    const std::size_t n = points.size();
    std::vector<std::vector<bool>> near(n, std::vector<bool>(n));
    std::vector<bool> core(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t count = 0;
        for (std::size_t j = 0; j < n; ++j) {
            near[i][j] = haversine_m(points[i], points[j]) <= eps_m;
            count += near[i][j];
        }
        core[i] = count >= min_pts;
    }

    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x];
        return x;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (core[i] && core[j] && near[i][j]) parent[find(i)] = find(j);
        }
    }

    std::vector<std::size_t> root(n);
    for (std::size_t i = 0; i < n; ++i) {
        root[i] = i;  // noise stays alone
        if (core[i]) {
            root[i] = find(i);
            continue;
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (core[j] && near[i][j]) {
                root[i] = find(j);
                break;
            }
        }
    }
    std::map<std::size_t, std::size_t> dense;
    std::vector<std::size_t> label(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto it = dense.find(root[i]);
        if (it == dense.end()) it = dense.emplace(root[i], dense.size()).first;
        label[i] = it->second;
    }
    return label;
}

std::vector<std::pair<std::size_t, std::size_t>> stay_windows(const std::vector<nextloc::stops::GpsPoint>& trace,
                                                              double radius_m, long min_dwell_s) {
    auto fits = [&](std::size_t a, std::size_t b) {
        double lat = 0, lon = 0;
        for (std::size_t k = a; k <= b; ++k) {
            lat += trace[k].latitude;
            lon += trace[k].longitude;
        }
        const LatLon c{lat / static_cast<double>(b - a + 1), lon / static_cast<double>(b - a + 1)};
        for (std::size_t k = a; k <= b; ++k) {
            if (haversine_m(c, trace[k].position()) > radius_m) return false;
        }
        return true;
    };
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t i = 0;
    while (i + 1 < trace.size()) {
        std::size_t j = i;
        for (std::size_t cand = i + 1; cand < trace.size(); ++cand) {
            if (!fits(i, cand)) break;
            j = cand;
        }
        const auto dwell = (trace[j].timestamp - trace[i].timestamp).count();
        if (j > i && dwell >= min_dwell_s) {
            out.emplace_back(i, j);
            i = j + 1;
        } else {
            ++i;
        }
    }
    return out;
}

double acc_at_k(const std::vector<nextloc::PredictionInstance>& instances,
                const std::vector<nextloc::PredictionResult>& results, std::size_t k) {
    std::size_t hits = 0;
    for (const auto& inst : instances) {
        for (const auto& r : results) {
            if (r.instance_id != inst.instance_id) continue;
            for (std::size_t i = 0; i < r.predicted_ids.size() && i < k; ++i) {
                if (r.predicted_ids[i] == inst.target.location_id) {
                    ++hits;
                    break;
                }
            }
            break;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(instances.size());
}

std::vector<std::string> frequency_rank(const std::vector<nextloc::Visit>& seq, std::size_t limit) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> stat;  // count, last position
    for (std::size_t i = 0; i < seq.size(); ++i) {
        auto& s = stat[seq[i].location_id];
        ++s.first;
        s.second = i;
    }
    std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> v(stat.begin(), stat.end());
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        if (a.second.first != b.second.first) return a.second.first > b.second.first;
        return a.second.second > b.second.second;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size() && i < limit; ++i) out.push_back(v[i].first);
    return out;
}

std::vector<std::string> recency_rank(const std::vector<nextloc::Visit>& seq, std::size_t limit) {
    std::vector<std::string> out;
    for (auto it = seq.rbegin(); it != seq.rend() && out.size() < limit; ++it) {
        if (std::find(out.begin(), out.end(), it->location_id) == out.end()) out.push_back(it->location_id);
    }
    return out;
}

}  // namespace oracle
