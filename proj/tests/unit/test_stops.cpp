// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <set>

#include "nextloc/error.hpp"
#include "nextloc/rng.hpp"
#include "nextloc/stops.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace nextloc;
using namespace nextloc::stops;

namespace {

const LatLon kBase{40.7484, -73.9857};

std::vector<LatLon> scatter(std::uint64_t seed, std::size_t n) {
    // A handful of blobs plus background noise inside ~2 km.
    SeededRng rng(seed);
    std::vector<LatLon> centres;
    for (int c = 0; c < 6; ++c) {
        centres.push_back(testsupport::offset_north(testsupport::offset_east(kBase, rng.unit() * 2000.0),
                                                    rng.unit() * 2000.0));
    }
    std::vector<LatLon> pts;
    for (std::size_t i = 0; i < n; ++i) {
        if (rng.unit() < 0.2) {
            pts.push_back(testsupport::offset_north(testsupport::offset_east(kBase, rng.unit() * 2000.0),
                                                    rng.unit() * 2000.0));
        } else {
            const auto& c = centres[rng.below(centres.size())];
            pts.push_back(testsupport::offset_north(testsupport::offset_east(c, (rng.unit() - 0.5) * 150.0),
                                                    (rng.unit() - 0.5) * 150.0));
        }
    }
    return pts;
}

}  // namespace

TEST_CASE("haversine: 0.001 degree of latitude is about 111.2 m") {
    CHECK(haversine_m({40.0, -74.0}, {40.001, -74.0}) == doctest::Approx(111.2).epsilon(0.5 / 111.2));
    CHECK(haversine_m(kBase, kBase) == 0.0);
    const auto e = testsupport::offset_east(kBase, 500.0);
    CHECK(haversine_m(kBase, e) == doctest::Approx(500.0).epsilon(1e-3));
}

TEST_CASE("dbscan equals the brute-force reachability oracle") {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        const std::size_t n = 20 + seed * 15;  // up to 200
        const auto pts = scatter(seed, n);
        for (double eps : {25.0, 60.0, 120.0}) {
            for (std::size_t min_pts : {1u, 2u, 4u, 7u}) {
                CAPTURE(seed);
                CAPTURE(eps);
                CAPTURE(min_pts);
                CHECK(dbscan(pts, {eps, min_pts}) == oracle::dbscan(pts, eps, min_pts));
            }
        }
    }
}

TEST_CASE("dbscan edge cases") {
    CHECK(dbscan({}, {}).empty());
    CHECK(dbscan({kBase}, {}) == std::vector<std::size_t>{0});
    // Two points 50 m apart merge at eps 60, split at eps 40.
    const std::vector<LatLon> two{kBase, testsupport::offset_east(kBase, 50.0)};
    CHECK(dbscan(two, {60.0, 1}) == std::vector<std::size_t>{0, 0});
    CHECK(dbscan(two, {40.0, 1}) == std::vector<std::size_t>{0, 1});
    // min_pts counts the point itself: with 2 both are core.
    CHECK(dbscan(two, {60.0, 2}) == std::vector<std::size_t>{0, 0});
    CHECK(dbscan(two, {60.0, 3}) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("stay detection equals the window oracle") {
    const auto a = testsupport::offset_east(kBase, 500.0);
    const auto b = testsupport::offset_north(a, 500.0);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto csv =
            testsupport::gps_trace_csv("u", {{kBase, 10}, {a, 3 + static_cast<int>(seed)}, {b, 12}}, seed, 8.0);
        const auto trace = parse_gps_text(csv).points;
        for (double radius : {30.0, 65.0}) {
            const StayParams params{radius, std::chrono::minutes{5}};
            const auto got = detect_stay_candidates(trace, params);
            const auto want = oracle::stay_windows(trace, radius, 300);
            REQUIRE(got.size() == want.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].first_index == want[i].first);
                CHECK(got[i].last_index == want[i].second);
            }
        }
    }
}

TEST_CASE("three planted stops are recovered") {
    const auto a = testsupport::offset_east(kBase, 500.0);
    const auto b = testsupport::offset_east(a, 500.0);
    const auto trace = parse_gps_text(testsupport::gps_trace_csv("u1", {{kBase, 10}, {a, 10}, {b, 10}})).points;
    const auto res = run_stop_pipeline(trace, "gps", {}, {}, 200.0, LocationIdKind::Stop);
    std::set<std::string> ids;
    for (const auto& s : res.stops) ids.insert(s.stop_id);
    REQUIRE(ids.size() == 3);
    REQUIRE(res.stops.size() == 3);
    const LatLon truth[] = {kBase, a, b};
    for (std::size_t i = 0; i < 3; ++i) CHECK(haversine_m(res.stops[i].centroid, truth[i]) < 10.0);
    REQUIRE(res.dataset.users.size() == 1);
    CHECK(res.dataset.users[0].visits.size() == 3);
    CHECK(res.dataset.vocabulary == ids);
}

TEST_CASE("short dwell is not a stop") {
    const auto a = testsupport::offset_east(kBase, 500.0);
    const auto trace = parse_gps_text(testsupport::gps_trace_csv("u1", {{kBase, 2}, {a, 10}})).points;
    CHECK(detect_stay_candidates(trace).size() == 1);
}

TEST_CASE("revisits share a stop id across users") {
    const auto a = testsupport::offset_east(kBase, 600.0);
    std::string csv = testsupport::gps_trace_csv("u1", {{kBase, 10}, {a, 10}, {kBase, 10}}, 1);
    const auto second = testsupport::gps_trace_csv("u2", {{a, 10}}, 2);
    csv += second.substr(second.find('\n') + 1);
    const auto res = run_stop_pipeline(parse_gps_text(csv).points, "gps", {}, {}, 200.0, LocationIdKind::Stop);
    REQUIRE(res.stops.size() == 4);
    CHECK(res.stops[0].stop_id == res.stops[2].stop_id);
    CHECK(res.stops[1].stop_id == res.stops[3].stop_id);
    CHECK(res.stops[0].stop_id != res.stops[1].stop_id);
    CHECK(res.dataset.users.size() == 2);
}

TEST_CASE("grid cells") {
    const auto far = testsupport::offset_north(testsupport::offset_east(kBase, 1050.0), 450.0);
    const auto grid = GridSpec::covering({kBase, far}, 200.0);
    CHECK(assign_grid_cell(kBase, grid) == GridCell{0, 0});
    const auto cell = assign_grid_cell(far, grid);
    CHECK(cell.col == 5);
    CHECK(cell.row == 2);
    CHECK(cell.id() == "c5_2");
    CHECK_THROWS_AS(assign_grid_cell(testsupport::offset_east(far, 10.0), grid), OutOfBoundsError);
    auto bad = grid;
    bad.cell_size_m = 0;
    CHECK_THROWS_AS(assign_grid_cell(kBase, bad), ConfigError);
    CHECK_THROWS_AS(GridSpec::covering({}, 200.0), DataError);

    const auto a = testsupport::offset_east(kBase, 500.0);
    const auto trace = parse_gps_text(testsupport::gps_trace_csv("u", {{kBase, 10}, {a, 10}})).points;
    const auto res = run_stop_pipeline(trace, "gps", {}, {}, 200.0, LocationIdKind::Cell);
    for (const auto& u : res.dataset.users) {
        for (const auto& v : u.visits) CHECK(v.location_id.front() == 'c');
    }
}

TEST_CASE("gps parsing") {
    const auto res = parse_gps_text("user_id,latitude,longitude,timestamp\nu,40.1,-73.9,2012-04-03T08:00:00Z\n"
                                    "u,91,-73.9,2012-04-03T08:00:30Z\nu,40.1,-73.9\n");
    CHECK(res.points.size() == 1);
    CHECK(res.rejects.size() == 2);
    CHECK_THROWS_AS(parse_gps_text("user_id,latitude,longitude,timestamp\n"), DataError);
    CHECK(parse_location_id_kind("cell") == LocationIdKind::Cell);
    CHECK_THROWS_AS(parse_location_id_kind("grid"), ConfigError);
}

TEST_CASE("stops jsonl") {
    const auto trace = parse_gps_text(testsupport::gps_trace_csv("u", {{kBase, 10}})).points;
    const auto res = run_stop_pipeline(trace, "gps", {}, {}, 200.0, LocationIdKind::Stop);
    const auto line = stops_to_jsonl(res.stops);
    const auto j = Json::parse(line.substr(0, line.find('\n')));
    CHECK(j["stop_id"] == "s0");
    CHECK(j["arrival"] == "2012-04-03T08:00:00Z");
    CHECK(j["departure"] == "2012-04-03T08:10:00Z");
}
