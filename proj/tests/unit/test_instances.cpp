// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <set>

#include "nextloc/error.hpp"
#include "nextloc/instances.hpp"
#include "synthetic.hpp"

using namespace nextloc;
using namespace std::chrono;

namespace {

UserHistory user_at_hours(const std::vector<long>& hours_from_start) {
    UserHistory u{"u", {}};
    const LocalTime t0{local_days{year{2012} / April / 1}};
    for (std::size_t i = 0; i < hours_from_start.size(); ++i) {
        u.visits.push_back(Visit::at(t0 + hours{hours_from_start[i]}, "L" + std::to_string(i)));
    }
    return u;
}

// Cut wherever the gap reaches the threshold, by index arithmetic only.
std::vector<std::size_t> cut_points(const UserHistory& u, seconds gap) {
    std::vector<std::size_t> cuts;
    for (std::size_t i = 1; i < u.visits.size(); ++i) {
        if (u.visits[i].local_time - u.visits[i - 1].local_time >= gap) cuts.push_back(i);
    }
    return cuts;
}

UserTrajectories trajectories_of_sizes(const std::vector<std::size_t>& sizes) {
    UserTrajectories u{"u", {}};
    LocalTime t{local_days{year{2012} / April / 1}};
    std::size_t n = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        Trajectory tr{"u", k, {}};
        for (std::size_t i = 0; i < sizes[k]; ++i) {
            tr.visits.push_back(Visit::at(t, "L" + std::to_string(n++)));
            t += hours{1};
        }
        t += hours{100};
        u.trajectories.push_back(std::move(tr));
    }
    return u;
}

std::vector<std::string> ids(const std::vector<Visit>& v) {
    std::vector<std::string> out;
    for (const auto& x : v) out.push_back(x.location_id);
    return out;
}

}  // namespace

TEST_CASE("segmentation matches a brute-force cut oracle") {
    const auto text = testsupport::synthetic_checkins({.users = 12, .trips_per_user = 6});
    const auto ds = parse_checkin_text(text, "syn").dataset;
    for (const auto& u : ds.users) {
        const auto trajs = segment(u, kDefaultGap);
        const auto cuts = cut_points(u, kDefaultGap);
        REQUIRE(trajs.size() == cuts.size() + 1);
        std::size_t begin = 0;
        for (std::size_t k = 0; k < trajs.size(); ++k) {
            const std::size_t end = k < cuts.size() ? cuts[k] : u.visits.size();
            CHECK(trajs[k].visits.size() == end - begin);
            CHECK(trajs[k].visits.front() == u.visits[begin]);
            CHECK(trajs[k].index == k);
            begin = end;
        }
    }
}

TEST_CASE("a gap of exactly 72 hours splits, 71:59:59 does not") {
    UserHistory u = user_at_hours({0, 72, 144});
    CHECK(segment(u).size() == 3);
    u.visits[1] = Visit::at(u.visits[0].local_time + hours{72} - seconds{1}, "x");
    CHECK(segment(u).size() == 2);
    CHECK(segment(UserHistory{"e", {}}).empty());
}

TEST_CASE("trajectory filter and stats") {
    const auto text = testsupport::synthetic_checkins({.users = 8, .trips_per_user = 6, .sparse_users = 2});
    const auto seg = segment_dataset(parse_checkin_text(text, "syn").dataset);
    const auto kept = filter_trajectory_users(seg, 5);
    for (const auto& u : kept.users) CHECK(u.trajectories.size() >= 5);
    const auto s = dataset_stats(kept);
    CHECK(s.users == kept.users.size());
    CHECK(s.unique_locations == kept.vocabulary.size());
    std::size_t t = 0;
    for (const auto& u : kept.users) t += u.trajectories.size();
    CHECK(s.trajectories == t);
    CHECK(dataset_stats(filter_trajectory_users(seg, 1000)) == DatasetStats{});
}

TEST_CASE("per-user split counts") {
    CHECK(split_user(10) == SplitCounts{7, 1, 2});
    CHECK(split_user(5) == SplitCounts{3, 0, 2});
    CHECK(split_user(1) == SplitCounts{0, 0, 1});
    CHECK(split_user(2) == SplitCounts{1, 0, 1});
    CHECK(split_user(0) == SplitCounts{0, 0, 0});
    for (std::size_t n = 1; n < 200; ++n) {
        const auto c = split_user(n);
        CHECK(c.train + c.valid + c.test == n);
        CHECK(c.test >= 1);
    }
    CHECK_THROWS_AS(split_user(10, {0.5, 0.5, 0.5}), ConfigError);
}

TEST_CASE("windows: context inside the trajectory, history reaching back") {
    const auto u = trajectories_of_sizes({4, 4, 4, 4, 10});
    const auto b = build_instances(u, {15, 6});
    REQUIRE(b.instances.size() == 2);  // 5 trajectories: 3 train, 0 valid, 2 test
    const auto& inst = b.instances[1];
    CHECK(inst.target.location_id == "L25");
    CHECK(ids(inst.contextual) == std::vector<std::string>{"L19", "L20", "L21", "L22", "L23", "L24"});
    REQUIRE(inst.historical.size() == 15);
    CHECK(inst.historical.front().location_id == "L4");
    CHECK(inst.historical.back().location_id == "L18");
    CHECK(inst.trajectory_index == 4);
}

TEST_CASE("short trajectories and configured-zero windows") {
    const auto u = trajectories_of_sizes({3, 3, 3, 3, 2});
    auto b = build_instances(u, {15, 6});
    REQUIRE(b.instances.size() == 2);
    CHECK(b.instances.back().contextual.size() == 1);  // whatever precedes the target
    CHECK(b.instances.back().historical.size() == 12);

    b = build_instances(u, {0, 6});
    REQUIRE(b.instances.size() == 2);
    CHECK(b.instances.back().historical.empty());

    b = build_instances(u, {15, 0});
    REQUIRE(b.instances.size() == 2);
    CHECK(b.instances.back().contextual.empty());
    CHECK(b.instances.back().historical.size() == 13);

    const auto single = trajectories_of_sizes({1});
    b = build_instances(single, {15, 6});
    CHECK(b.instances.empty());
    CHECK(b.skipped_short_trajectory == 1);

    const auto lone = trajectories_of_sizes({3});
    b = build_instances(lone, {15, 6});
    CHECK(b.skipped_empty_history == 1);
}

TEST_CASE("instance ids are stable across window sizes") {
    const auto u = trajectories_of_sizes({5, 5, 5, 5, 5, 5, 5, 5, 5, 8});
    const auto a = build_instances(u, {15, 6});
    const auto b = build_instances(u, {30, 12});
    REQUIRE(a.instances.size() == b.instances.size());
    for (std::size_t i = 0; i < a.instances.size(); ++i) {
        CHECK(a.instances[i].instance_id == b.instances[i].instance_id);
        CHECK(build_instance_at(u, a.instances[i].trajectory_index, {30, 12}).historical ==
              b.instances[i].historical);
    }
    const auto train = build_instances(u, {15, 6}, SplitPart::Train);
    CHECK(train.instances.size() == 6);
    CHECK(train.skipped_empty_history == 1);  // the very first trajectory has nothing before it
    CHECK(build_instances(u, {15, 6}, SplitPart::Valid).instances.size() == 1);
}

TEST_CASE("sampling preserves order and is seeded") {
    std::vector<PredictionInstance> all;
    for (std::size_t i = 0; i < 50; ++i) all.push_back(testsupport::random_instance(1, i, 30));
    const auto a = sample_instances(all, 10, 42);
    const auto b = sample_instances(all, 10, 42);
    REQUIRE(a.size() == 10);
    std::vector<std::string> ia, ib;
    for (const auto& x : a) ia.push_back(x.instance_id);
    for (const auto& x : b) ib.push_back(x.instance_id);
    CHECK(ia == ib);
    std::size_t last = 0;
    for (const auto& x : a) {
        const auto pos = static_cast<std::size_t>(std::stoul(x.instance_id.substr(1)));
        CHECK(pos >= last);
        last = pos;
    }
    CHECK(sample_instances(all, 100, 42).size() == 50);
}

TEST_CASE("instance json round trip") {
    testsupport::TempDir dir("inst");
    std::vector<PredictionInstance> all;
    for (std::size_t i = 0; i < 5; ++i) all.push_back(testsupport::random_instance(3, i, 30));
    write_file_atomic(dir / "i.jsonl", instances_to_jsonl(all));
    const auto back = read_instances(dir / "i.jsonl");
    REQUIRE(back.size() == all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        CHECK(back[i].instance_id == all[i].instance_id);
        CHECK(back[i].historical == all[i].historical);
        CHECK(back[i].contextual == all[i].contextual);
        CHECK(back[i].target == all[i].target);
    }
}
