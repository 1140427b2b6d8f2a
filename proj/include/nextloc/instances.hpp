// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "nextloc/fileio.hpp"
#include "nextloc/ingest.hpp"

namespace nextloc {

inline constexpr std::chrono::hours kDefaultGap{72};

struct Trajectory {
    std::string user_id;
    std::size_t index = 0;  // position in the user's trajectory list
    std::vector<Visit> visits;
};

struct UserTrajectories {
    std::string user_id;
    std::vector<Trajectory> trajectories;
};

struct SegmentedDataset {
    std::string name;
    std::vector<UserTrajectories> users;
    std::set<std::string> vocabulary;

    void rebuild_vocabulary();
};

/// Splits a user's visits wherever two consecutive visits are at least `gap` apart.
std::vector<Trajectory> segment(const UserHistory& user, std::chrono::seconds gap = kDefaultGap);

SegmentedDataset segment_dataset(const Dataset& dataset, std::chrono::seconds gap = kDefaultGap);

/// Keeps users with at least `min_trajectories` trajectories.
SegmentedDataset filter_trajectory_users(const SegmentedDataset& dataset, std::size_t min_trajectories = 5);

struct DatasetStats {
    std::size_t users = 0;
    std::size_t unique_locations = 0;
    std::size_t trajectories = 0;

    friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

DatasetStats dataset_stats(const SegmentedDataset& dataset);

struct SplitSpec {
    double train_frac = 0.70;
    double valid_frac = 0.10;
    double test_frac = 0.20;
};

/// Trajectory counts per split: floor for train, floor for validation, the
/// rest for test. Test is never empty for n >= 1.
struct SplitCounts {
    std::size_t train = 0;
    std::size_t valid = 0;
    std::size_t test = 0;

    friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

SplitCounts split_user(std::size_t trajectory_count, const SplitSpec& spec = {});

enum class SplitPart { Train, Valid, Test };

struct WindowSpec {
    std::size_t history = 15;
    std::size_t context = 6;
};

struct PredictionInstance {
    std::string instance_id;
    std::string user_id;
    std::size_t trajectory_index = 0;
    std::vector<Visit> historical;  // chronological
    std::vector<Visit> contextual;  // chronological
    Visit target;
};

struct InstanceBuild {
    std::vector<PredictionInstance> instances;
    std::size_t skipped_short_trajectory = 0;  // fewer than two visits
    std::size_t skipped_empty_history = 0;
    std::size_t skipped_empty_context = 0;

    std::size_t skipped() const { return skipped_short_trajectory + skipped_empty_history + skipped_empty_context; }
};

/// Stable identifier of a target visit; identical across window sizes so that
/// ablation arms line up.
std::string make_instance_id(const std::string& user_id, std::size_t trajectory_index, const Visit& target);

/// One instance per trajectory of the requested split: the target is the last
/// visit, the context is up to `context` visits right before it inside the
/// same trajectory, and the history is up to `history` visits right before the
/// context, reaching back into earlier trajectories. A window of configured
/// size zero is allowed to be empty; an empty window of non-zero size skips
/// the instance.
InstanceBuild build_instances(const UserTrajectories& user, const WindowSpec& window, SplitPart scope = SplitPart::Test);

InstanceBuild build_instances(const SegmentedDataset& dataset, const WindowSpec& window,
                              SplitPart scope = SplitPart::Test);

/// Rebuilds the instance for trajectory `trajectory_index` with another window,
/// without applying the skip rules. Used to keep targets fixed across arms.
PredictionInstance build_instance_at(const UserTrajectories& user, std::size_t trajectory_index,
                                     const WindowSpec& window);

/// Seeded subset of size min(count, n) that preserves the input order.
std::vector<PredictionInstance> sample_instances(const std::vector<PredictionInstance>& instances, std::size_t count,
                                                 std::uint64_t seed);

Json visit_to_json(const Visit& v);
Visit visit_from_json(const Json& j);
Json instance_to_json(const PredictionInstance& inst);
PredictionInstance instance_from_json(const Json& j);

std::string instances_to_jsonl(const std::vector<PredictionInstance>& instances);
std::vector<PredictionInstance> read_instances(const std::filesystem::path& path);

}  // namespace nextloc
