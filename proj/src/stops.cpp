// SPDX-License-Identifier: Apache-2.0
#include "nextloc/stops.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <unordered_map>

#include "nextloc/error.hpp"
#include "nextloc/fileio.hpp"

namespace nextloc::stops {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

bool parse_double(std::string_view s, double& out) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size() && std::isfinite(out);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
    return s;
}

LatLon mean_position(const std::vector<GpsPoint>& trace, std::size_t first, std::size_t last) {
    double lat = 0.0, lon = 0.0;
    for (std::size_t k = first; k <= last; ++k) {
        lat += trace[k].latitude;
        lon += trace[k].longitude;
    }
    const double n = static_cast<double>(last - first + 1);
    return {lat / n, lon / n};
}

bool window_fits(const std::vector<GpsPoint>& trace, std::size_t first, std::size_t last, double radius_m) {
    const LatLon c = mean_position(trace, first, last);
    for (std::size_t k = first; k <= last; ++k) {
        if (haversine_m(c, trace[k].position()) > radius_m) return false;
    }
    return true;
}

// Planar coordinates for the neighbour index only; exact distances use haversine.
struct Planar {
    double x;
    double y;
};

std::vector<Planar> project(const std::vector<LatLon>& points) {
    double lat0 = 0.0;
    for (const auto& p : points) lat0 += p.lat;
    lat0 = points.empty() ? 0.0 : lat0 / static_cast<double>(points.size());
    const double kx = kEarthRadiusM * kDegToRad * std::cos(lat0 * kDegToRad);
    const double ky = kEarthRadiusM * kDegToRad;
    std::vector<Planar> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back({p.lon * kx, p.lat * ky});
    return out;
}

struct CellKey {
    long cx;
    long cy;
    bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
    std::size_t operator()(const CellKey& k) const noexcept {
        return std::hash<long>{}(k.cx) * 1000003u ^ std::hash<long>{}(k.cy);
    }
};

std::vector<std::vector<std::size_t>> neighbourhoods(const std::vector<LatLon>& points, double eps) {
    const auto planar = project(points);
    const double cell = std::max(eps, 1e-9);
    std::unordered_map<CellKey, std::vector<std::size_t>, CellKeyHash> index;
    std::vector<CellKey> keys;
    keys.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        CellKey k{static_cast<long>(std::floor(planar[i].x / cell)), static_cast<long>(std::floor(planar[i].y / cell))};
        keys.push_back(k);
        index[k].push_back(i);
    }
    std::vector<std::vector<std::size_t>> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        // Two rings absorb the projection's distortion across a city-sized box.
        for (long dx = -2; dx <= 2; ++dx) {
            for (long dy = -2; dy <= 2; ++dy) {
                auto it = index.find({keys[i].cx + dx, keys[i].cy + dy});
                if (it == index.end()) continue;
                for (auto j : it->second) {
                    if (haversine_m(points[i], points[j]) <= eps) out[i].push_back(j);
                }
            }
        }
        std::sort(out[i].begin(), out[i].end());
    }
    return out;
}

}  // namespace

double haversine_m(LatLon a, LatLon b) {
    const double dlat = (b.lat - a.lat) * kDegToRad;
    const double dlon = (b.lon - a.lon) * kDegToRad;
    const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(a.lat * kDegToRad) * std::cos(b.lat * kDegToRad) * std::sin(dlon / 2) * std::sin(dlon / 2);
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(s)));
}

GpsParseResult parse_gps_text(std::string_view text) {
    GpsParseResult result;
    std::size_t start = 0;
    std::size_t line_no = 0;
    std::vector<GpsPoint> points;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        std::vector<std::string_view> f;
        std::size_t s = 0;
        while (true) {
            const auto comma = line.find(',', s);
            f.push_back(line.substr(s, comma == std::string_view::npos ? std::string_view::npos : comma - s));
            if (comma == std::string_view::npos) break;
            s = comma + 1;
        }
        GpsPoint p;
        if (line_no == 1 && f.size() == 4 && !parse_double(f[1], p.latitude)) continue;  // header
        ++result.rows_in_file;
        std::string reason;
        if (f.size() != 4) {
            reason = "expected 4 comma-separated fields, found " + std::to_string(f.size());
        } else if (trim(f[0]).empty()) {
            reason = "empty user id";
        } else if (!parse_double(f[1], p.latitude) || p.latitude < -90 || p.latitude > 90) {
            reason = "invalid latitude";
        } else if (!parse_double(f[2], p.longitude) || p.longitude < -180 || p.longitude > 180) {
            reason = "invalid longitude";
        } else if (auto ts = parse_iso8601(trim(f[3])); !ts) {
            reason = "invalid timestamp";
        } else {
            p.user_id = trim(f[0]);
            p.timestamp = ts->utc;
            p.local_time = ts->local;
            points.push_back(std::move(p));
            continue;
        }
        result.rejects.push_back({line_no, std::string(line), std::move(reason)});
    }
    if (points.empty()) throw DataError("no GPS rows parsed (" + std::to_string(result.rows_in_file) + " rows)");
    std::stable_sort(points.begin(), points.end(), [](const GpsPoint& a, const GpsPoint& b) {
        if (a.user_id != b.user_id) return a.user_id < b.user_id;
        return a.timestamp < b.timestamp;
    });
    result.points = std::move(points);
    return result;
}

GpsParseResult parse_gps_file(const std::filesystem::path& path) {
    try {
        return parse_gps_text(read_file(path));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::vector<StayCandidate> detect_stay_candidates(const std::vector<GpsPoint>& trace, const StayParams& params) {
    std::vector<StayCandidate> out;
    if (trace.size() < 2) return out;
    std::size_t i = 0;
    while (i + 1 < trace.size()) {
        std::size_t j = i;
        while (j + 1 < trace.size() && window_fits(trace, i, j + 1, params.radius_m)) ++j;
        if (j > i && trace[j].timestamp - trace[i].timestamp >= params.min_dwell) {
            StayCandidate c;
            c.user_id = trace[i].user_id;
            c.centroid = mean_position(trace, i, j);
            c.arrival = trace[i].timestamp;
            c.departure = trace[j].timestamp;
            c.local_arrival = trace[i].local_time;
            c.first_index = i;
            c.last_index = j;
            out.push_back(std::move(c));
            i = j + 1;
        } else {
            ++i;
        }
    }
    return out;
}

std::vector<std::size_t> dbscan(const std::vector<LatLon>& points, const ClusterParams& params) {
    const std::size_t n = points.size();
    constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
    const auto nbrs = neighbourhoods(points, params.epsilon_m);

    std::vector<bool> core(n);
    for (std::size_t i = 0; i < n; ++i) core[i] = nbrs[i].size() >= params.min_pts;

    std::vector<std::size_t> label(n, kUnset);
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i] || label[i] != kUnset) continue;
        const std::size_t id = next++;
        std::vector<std::size_t> frontier{i};
        label[i] = id;
        while (!frontier.empty()) {
            const auto p = frontier.back();
            frontier.pop_back();
            for (auto q : nbrs[p]) {
                if (core[q] && label[q] == kUnset) {
                    label[q] = id;
                    frontier.push_back(q);
                }
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) continue;
        for (auto q : nbrs[i]) {  // ascending, so the first core hit is the lowest index
            if (core[q]) {
                label[i] = label[q];
                break;
            }
        }
        if (label[i] == kUnset) label[i] = next++;
    }

    // Renumber by lowest member index.
    std::vector<std::size_t> remap(next, kUnset);
    std::size_t dense = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (remap[label[i]] == kUnset) remap[label[i]] = dense++;
        label[i] = remap[label[i]];
    }
    return label;
}

std::vector<StopLocation> cluster_stays(const std::vector<StayCandidate>& candidates, const ClusterParams& params) {
    std::vector<LatLon> centroids;
    centroids.reserve(candidates.size());
    for (const auto& c : candidates) centroids.push_back(c.centroid);
    const auto labels = dbscan(centroids, params);

    std::map<std::size_t, std::pair<LatLon, std::size_t>> sums;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        auto& [sum, count] = sums[labels[i]];
        sum.lat += centroids[i].lat;
        sum.lon += centroids[i].lon;
        ++count;
    }
    std::vector<StopLocation> out;
    out.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& [sum, count] = sums[labels[i]];
        StopLocation s;
        s.user_id = candidates[i].user_id;
        s.stop_id = "s" + std::to_string(labels[i]);
        s.centroid = {sum.lat / static_cast<double>(count), sum.lon / static_cast<double>(count)};
        s.arrival = candidates[i].arrival;
        s.departure = candidates[i].departure;
        s.local_arrival = candidates[i].local_arrival;
        out.push_back(std::move(s));
    }
    return out;
}

std::string GridCell::id() const { return "c" + std::to_string(col) + "_" + std::to_string(row); }

GridSpec GridSpec::covering(const std::vector<LatLon>& points, double cell_size_m) {
    if (points.empty()) throw DataError("cannot build a grid over zero points");
    GridSpec g;
    g.cell_size_m = cell_size_m;
    g.min_corner = points.front();
    g.max_corner = points.front();
    for (const auto& p : points) {
        g.min_corner.lat = std::min(g.min_corner.lat, p.lat);
        g.min_corner.lon = std::min(g.min_corner.lon, p.lon);
        g.max_corner.lat = std::max(g.max_corner.lat, p.lat);
        g.max_corner.lon = std::max(g.max_corner.lon, p.lon);
    }
    g.origin = g.min_corner;
    return g;
}

GridCell assign_grid_cell(LatLon point, const GridSpec& grid) {
    if (!(grid.cell_size_m > 0.0)) throw ConfigError("grid cell size must be positive");
    if (point.lat < grid.min_corner.lat || point.lat > grid.max_corner.lat || point.lon < grid.min_corner.lon ||
        point.lon > grid.max_corner.lon) {
        throw OutOfBoundsError("point (" + std::to_string(point.lat) + ", " + std::to_string(point.lon) +
                               ") outside grid bounding box");
    }
    const double lat_c = 0.5 * (grid.min_corner.lat + grid.max_corner.lat);
    const double x = (point.lon - grid.origin.lon) * kDegToRad * kEarthRadiusM * std::cos(lat_c * kDegToRad);
    const double y = (point.lat - grid.origin.lat) * kDegToRad * kEarthRadiusM;
    return {static_cast<long>(std::floor(x / grid.cell_size_m)), static_cast<long>(std::floor(y / grid.cell_size_m))};
}

std::string to_string(LocationIdKind kind) { return kind == LocationIdKind::Stop ? "stop" : "cell"; }

LocationIdKind parse_location_id_kind(std::string_view s) {
    if (s == "stop") return LocationIdKind::Stop;
    if (s == "cell") return LocationIdKind::Cell;
    throw ConfigError("location id kind must be 'stop' or 'cell', got '" + std::string(s) + "'");
}

StopPipelineResult run_stop_pipeline(const std::vector<GpsPoint>& points, std::string dataset_name,
                                     const StayParams& stay, const ClusterParams& cluster, double cell_size_m,
                                     LocationIdKind id_kind) {
    std::vector<StayCandidate> candidates;
    std::size_t begin = 0;
    while (begin < points.size()) {
        std::size_t end = begin;
        while (end < points.size() && points[end].user_id == points[begin].user_id) ++end;
        std::vector<GpsPoint> trace(points.begin() + static_cast<std::ptrdiff_t>(begin),
                                    points.begin() + static_cast<std::ptrdiff_t>(end));
        auto found = detect_stay_candidates(trace, stay);
        candidates.insert(candidates.end(), std::make_move_iterator(found.begin()),
                          std::make_move_iterator(found.end()));
        begin = end;
    }

    StopPipelineResult result;
    result.id_kind = id_kind;
    result.stops = cluster_stays(candidates, cluster);
    if (!result.stops.empty()) {
        std::vector<LatLon> centres;
        centres.reserve(result.stops.size());
        for (const auto& s : result.stops) centres.push_back(s.centroid);
        result.grid = GridSpec::covering(centres, cell_size_m);
        for (auto& s : result.stops) s.cell_id = assign_grid_cell(s.centroid, result.grid).id();
    }

    std::map<std::string, UserHistory> users;
    for (const auto& s : result.stops) {
        auto& h = users[s.user_id];
        h.user_id = s.user_id;
        h.visits.push_back(Visit::at(s.local_arrival, id_kind == LocationIdKind::Stop ? s.stop_id : s.cell_id));
    }
    result.dataset.name = std::move(dataset_name);
    for (auto& [id, h] : users) {
        std::stable_sort(h.visits.begin(), h.visits.end(),
                         [](const Visit& a, const Visit& b) { return a.local_time < b.local_time; });
        result.dataset.users.push_back(std::move(h));
    }
    result.dataset.rebuild_vocabulary();
    return result;
}

std::string stops_to_jsonl(const std::vector<StopLocation>& stops) {
    std::vector<Json> rows;
    rows.reserve(stops.size());
    for (const auto& s : stops) {
        rows.push_back({{"user_id", s.user_id},
                        {"stop_id", s.stop_id},
                        {"cell_id", s.cell_id},
                        {"arrival", format_iso(s.arrival) + "Z"},
                        {"departure", format_iso(s.departure) + "Z"},
                        {"centroid", {{"lat", s.centroid.lat}, {"lon", s.centroid.lon}}}});
    }
    return to_jsonl(rows);
}

}  // namespace nextloc::stops
