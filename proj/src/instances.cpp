// SPDX-License-Identifier: Apache-2.0
#include "nextloc/instances.hpp"

#include <cmath>

#include "nextloc/error.hpp"
#include "nextloc/hash.hpp"
#include "nextloc/rng.hpp"

namespace nextloc {

void SegmentedDataset::rebuild_vocabulary() {
    vocabulary.clear();
    for (const auto& u : users) {
        for (const auto& t : u.trajectories) {
            for (const auto& v : t.visits) vocabulary.insert(v.location_id);
        }
    }
}

std::vector<Trajectory> segment(const UserHistory& user, std::chrono::seconds gap) {
    std::vector<Trajectory> out;
    for (std::size_t i = 0; i < user.visits.size(); ++i) {
        if (i == 0 || user.visits[i].local_time - user.visits[i - 1].local_time >= gap) {
            out.push_back(Trajectory{user.user_id, out.size(), {}});
        }
        out.back().visits.push_back(user.visits[i]);
    }
    return out;
}

SegmentedDataset segment_dataset(const Dataset& dataset, std::chrono::seconds gap) {
    SegmentedDataset out;
    out.name = dataset.name;
    out.users.reserve(dataset.users.size());
    for (const auto& u : dataset.users) out.users.push_back({u.user_id, segment(u, gap)});
    out.vocabulary = dataset.vocabulary;
    return out;
}

SegmentedDataset filter_trajectory_users(const SegmentedDataset& dataset, std::size_t min_trajectories) {
    SegmentedDataset out;
    out.name = dataset.name;
    for (const auto& u : dataset.users) {
        if (u.trajectories.size() >= min_trajectories) out.users.push_back(u);
    }
    out.rebuild_vocabulary();
    return out;
}

DatasetStats dataset_stats(const SegmentedDataset& dataset) {
    DatasetStats s;
    s.users = dataset.users.size();
    std::set<std::string> locations;
    for (const auto& u : dataset.users) {
        s.trajectories += u.trajectories.size();
        for (const auto& t : u.trajectories) {
            for (const auto& v : t.visits) locations.insert(v.location_id);
        }
    }
    s.unique_locations = locations.size();
    return s;
}

SplitCounts split_user(std::size_t n, const SplitSpec& spec) {
    if (std::abs(spec.train_frac + spec.valid_frac + spec.test_frac - 1.0) > 1e-9) {
        throw ConfigError("split fractions must sum to 1");
    }
    // The small epsilon keeps 0.7 * 10 from flooring to 6.
    SplitCounts c;
    c.train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.train_frac + 1e-9));
    c.valid = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.valid_frac + 1e-9));
    if (n > 0 && c.train + c.valid >= n) {
        if (c.valid > 0) --c.valid;
        else --c.train;
    }
    c.test = n - c.train - c.valid;
    return c;
}

std::string make_instance_id(const std::string& user_id, std::size_t trajectory_index, const Visit& target) {
    return short_hash(user_id + '\x1f' + std::to_string(trajectory_index) + '\x1f' + format_iso(target.local_time) +
                      '\x1f' + target.location_id);
}

PredictionInstance build_instance_at(const UserTrajectories& user, std::size_t k, const WindowSpec& window) {
    const auto& traj = user.trajectories.at(k).visits;
    if (traj.size() < 2) throw DataError("trajectory has fewer than two visits");

    PredictionInstance inst;
    inst.user_id = user.user_id;
    inst.trajectory_index = k;
    inst.target = traj.back();
    inst.instance_id = make_instance_id(user.user_id, k, inst.target);

    const std::size_t target_pos = traj.size() - 1;
    const std::size_t ctx_len = std::min(window.context, target_pos);
    const std::size_t ctx_begin = target_pos - ctx_len;
    inst.contextual.assign(traj.begin() + static_cast<std::ptrdiff_t>(ctx_begin),
                           traj.begin() + static_cast<std::ptrdiff_t>(target_pos));

    // Walk backwards from the visit before the context, crossing into earlier trajectories.
    std::vector<Visit> history;
    std::size_t t = k;
    std::size_t pos = ctx_begin;  // exclusive end within trajectory t
    while (history.size() < window.history) {
        if (pos == 0) {
            if (t == 0) break;
            --t;
            pos = user.trajectories[t].visits.size();
            continue;
        }
        --pos;
        history.push_back(user.trajectories[t].visits[pos]);
    }
    inst.historical.assign(history.rbegin(), history.rend());
    return inst;
}

InstanceBuild build_instances(const UserTrajectories& user, const WindowSpec& window, SplitPart scope) {
    InstanceBuild out;
    const auto counts = split_user(user.trajectories.size());
    std::size_t begin = 0, end = counts.train;
    if (scope == SplitPart::Valid) {
        begin = counts.train;
        end = counts.train + counts.valid;
    } else if (scope == SplitPart::Test) {
        begin = counts.train + counts.valid;
        end = user.trajectories.size();
    }
    for (std::size_t k = begin; k < end; ++k) {
        if (user.trajectories[k].visits.size() < 2) {
            ++out.skipped_short_trajectory;
            continue;
        }
        auto inst = build_instance_at(user, k, window);
        if (window.context > 0 && inst.contextual.empty()) {
            ++out.skipped_empty_context;
            continue;
        }
        if (window.history > 0 && inst.historical.empty()) {
            ++out.skipped_empty_history;
            continue;
        }
        out.instances.push_back(std::move(inst));
    }
    return out;
}

InstanceBuild build_instances(const SegmentedDataset& dataset, const WindowSpec& window, SplitPart scope) {
    InstanceBuild out;
    for (const auto& u : dataset.users) {
        auto b = build_instances(u, window, scope);
        out.skipped_short_trajectory += b.skipped_short_trajectory;
        out.skipped_empty_history += b.skipped_empty_history;
        out.skipped_empty_context += b.skipped_empty_context;
        out.instances.insert(out.instances.end(), std::make_move_iterator(b.instances.begin()),
                             std::make_move_iterator(b.instances.end()));
    }
    return out;
}

std::vector<PredictionInstance> sample_instances(const std::vector<PredictionInstance>& instances, std::size_t count,
                                                 std::uint64_t seed) {
    if (count >= instances.size()) return instances;
    SeededRng rng(seed);
    std::vector<PredictionInstance> out;
    out.reserve(count);
    for (auto i : rng.sample_indices(instances.size(), count)) out.push_back(instances[i]);
    return out;
}

Json visit_to_json(const Visit& v) {
    return {{"time", format_iso(v.local_time)}, {"hour", v.hour_label}, {"day", v.day_of_week},
            {"location_id", v.location_id}};
}

Visit visit_from_json(const Json& j) {
    const auto t = parse_local_iso(j.at("time").get<std::string>());
    if (!t) throw DataError("bad visit time: " + j.at("time").get<std::string>());
    return Visit::at(*t, j.at("location_id").get<std::string>());
}

Json instance_to_json(const PredictionInstance& inst) {
    Json h = Json::array(), c = Json::array();
    for (const auto& v : inst.historical) h.push_back(visit_to_json(v));
    for (const auto& v : inst.contextual) c.push_back(visit_to_json(v));
    return {{"instance_id", inst.instance_id},
            {"user_id", inst.user_id},
            {"trajectory_index", inst.trajectory_index},
            {"historical", std::move(h)},
            {"contextual", std::move(c)},
            {"target", visit_to_json(inst.target)}};
}

PredictionInstance instance_from_json(const Json& j) {
    PredictionInstance inst;
    inst.instance_id = j.at("instance_id").get<std::string>();
    inst.user_id = j.at("user_id").get<std::string>();
    inst.trajectory_index = j.at("trajectory_index").get<std::size_t>();
    for (const auto& v : j.at("historical")) inst.historical.push_back(visit_from_json(v));
    for (const auto& v : j.at("contextual")) inst.contextual.push_back(visit_from_json(v));
    inst.target = visit_from_json(j.at("target"));
    return inst;
}

std::string instances_to_jsonl(const std::vector<PredictionInstance>& instances) {
    std::vector<Json> rows;
    rows.reserve(instances.size());
    for (const auto& i : instances) rows.push_back(instance_to_json(i));
    return to_jsonl(rows);
}

std::vector<PredictionInstance> read_instances(const std::filesystem::path& path) {
    std::vector<PredictionInstance> out;
    for (const auto& j : read_jsonl(path)) out.push_back(instance_from_json(j));
    return out;
}

}  // namespace nextloc
