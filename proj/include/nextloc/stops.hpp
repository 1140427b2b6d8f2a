// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "nextloc/ingest.hpp"
#include "nextloc/timefmt.hpp"

namespace nextloc::stops {

inline constexpr double kEarthRadiusM = 6371008.8;

struct LatLon {
    double lat = 0.0;
    double lon = 0.0;
};

/// Great-circle distance in meters.
double haversine_m(LatLon a, LatLon b);

struct GpsPoint {
    std::string user_id;
    double latitude = 0.0;
    double longitude = 0.0;
    UtcTime timestamp{};
    LocalTime local_time{};

    LatLon position() const { return {latitude, longitude}; }
};

struct GpsParseResult {
    std::vector<GpsPoint> points;  // grouped by user, time-ordered within a user
    std::vector<RejectedRow> rejects;
    std::size_t rows_in_file = 0;
};

/// Comma-separated `user_id,latitude,longitude,timestamp` (ISO-8601). A first
/// line whose latitude is not numeric is treated as a header.
GpsParseResult parse_gps_text(std::string_view text);
GpsParseResult parse_gps_file(const std::filesystem::path& path);

struct StayCandidate {
    std::string user_id;
    LatLon centroid;
    UtcTime arrival{};
    UtcTime departure{};
    LocalTime local_arrival{};
    std::size_t first_index = 0;  // into the trace
    std::size_t last_index = 0;   // inclusive
};

struct StayParams {
    double radius_m = 65.0;
    std::chrono::seconds min_dwell{5 * 60};
};

/// Greedy left-to-right scan: from each start point, grow the window while
/// every member stays within `radius_m` of the window centroid; windows lasting
/// at least `min_dwell` become candidates and the scan resumes after them.
std::vector<StayCandidate> detect_stay_candidates(const std::vector<GpsPoint>& trace, const StayParams& params = {});

struct ClusterParams {
    double epsilon_m = 60.0;   // 65 m stay radius minus 5
    std::size_t min_pts = 1;   // neighbourhood count includes the point itself
};

/// Cluster label per input point. Labels are dense, numbered in order of each
/// cluster's lowest member index. Points that are neither core nor within
/// epsilon of a core point get singleton labels of their own.
///
/// Border points join the cluster of their lowest-index core neighbour, which
/// makes the labelling independent of traversal order.
std::vector<std::size_t> dbscan(const std::vector<LatLon>& points, const ClusterParams& params);

struct StopLocation {
    std::string user_id;
    std::string stop_id;   // shared by every visit to the same cluster
    std::string cell_id;   // grid cell of the cluster centroid, empty if no grid
    LatLon centroid;       // cluster centroid
    UtcTime arrival{};
    UtcTime departure{};
    LocalTime local_arrival{};
};

/// Clusters candidate centroids and returns one StopLocation per candidate, in
/// input order, carrying its cluster identity.
std::vector<StopLocation> cluster_stays(const std::vector<StayCandidate>& candidates, const ClusterParams& params = {});

struct GridCell {
    long col = 0;
    long row = 0;

    std::string id() const;
    friend bool operator==(const GridCell&, const GridCell&) = default;
};

struct GridSpec {
    LatLon origin;        // south-west corner of cell (0, 0)
    double cell_size_m = 200.0;
    LatLon min_corner;    // bounding box
    LatLon max_corner;

    /// Box spanning the points, with origin at its south-west corner.
    static GridSpec covering(const std::vector<LatLon>& points, double cell_size_m = 200.0);
};

/// Local equirectangular projection about the box centre; throws
/// OutOfBoundsError outside the box and ConfigError for a non-positive cell size.
GridCell assign_grid_cell(LatLon point, const GridSpec& grid);

enum class LocationIdKind { Stop, Cell };

std::string to_string(LocationIdKind kind);
LocationIdKind parse_location_id_kind(std::string_view s);

struct StopPipelineResult {
    std::vector<StopLocation> stops;  // all users
    Dataset dataset;                  // visits built from stops
    GridSpec grid;
    LocationIdKind id_kind = LocationIdKind::Stop;
};

/// GPS points -> per-user stay candidates -> DBSCAN across all users -> grid
/// cells -> a Dataset whose location ids are stop ids or cell ids.
StopPipelineResult run_stop_pipeline(const std::vector<GpsPoint>& points, std::string dataset_name,
                                     const StayParams& stay, const ClusterParams& cluster, double cell_size_m,
                                     LocationIdKind id_kind);

/// JSON-lines: {user_id, stop_id, cell_id, arrival, departure, centroid: {lat, lon}}.
std::string stops_to_jsonl(const std::vector<StopLocation>& stops);

}  // namespace nextloc::stops
