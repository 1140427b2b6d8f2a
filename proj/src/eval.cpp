// SPDX-License-Identifier: Apache-2.0
#include "nextloc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <unordered_map>
#include <unordered_set>

#include "nextloc/error.hpp"

namespace nextloc {

ScoredInstance score(const PredictionInstance& instance, const PredictionResult& result) {
    ScoredInstance s;
    s.instance_id = instance.instance_id;
    s.target_id = instance.target.location_id;
    s.predicted_ids = result.predicted_ids;
    s.classification = result.classification;
    s.failed = result.failed;
    const auto it = std::find(s.predicted_ids.begin(), s.predicted_ids.end(), s.target_id);
    if (it != s.predicted_ids.end()) s.rank_of_target = static_cast<std::size_t>(it - s.predicted_ids.begin()) + 1;
    return s;
}

PredictionResult drop_hallucinated(PredictionResult result) {
    if (result.hallucinated_ids.empty()) return result;
    const std::unordered_set<std::string> bad(result.hallucinated_ids.begin(), result.hallucinated_ids.end());
    std::erase_if(result.predicted_ids, [&](const std::string& id) { return bad.count(id) > 0; });
    std::erase_if(result.novel_ids, [&](const std::string& id) { return bad.count(id) > 0; });
    result.hallucinated_ids.clear();
    result.classification = result.predicted_ids.empty() ? OutputClass::EmptyUnusable : OutputClass::Valid;
    return result;
}

std::string to_string(Denominator d) { return d == Denominator::All ? "all" : "parseable"; }

Denominator parse_denominator(std::string_view s) {
    if (s == "all") return Denominator::All;
    if (s == "parseable") return Denominator::Parseable;
    throw ConfigError("unknown denominator '" + std::string(s) + "' (expected all or parseable)");
}

std::optional<double> acc_at_k(const std::vector<ScoredInstance>& scored, std::size_t k, Denominator denominator) {
    std::size_t n = 0, hits = 0;
    for (const auto& s : scored) {
        if (denominator == Denominator::Parseable && s.predicted_ids.empty()) continue;
        ++n;
        if (s.hit(k)) ++hits;
    }
    if (n == 0) return std::nullopt;
    return static_cast<double>(hits) / static_cast<double>(n);
}

std::vector<ScoredInstance> score_run(const std::vector<PredictionInstance>& instances,
                                      const std::vector<PredictionResult>& results, bool drop_halluc) {
    std::unordered_map<std::string, const PredictionResult*> by_id;
    for (const auto& r : results) by_id.emplace(r.instance_id, &r);
    std::vector<ScoredInstance> out;
    out.reserve(instances.size());
    for (const auto& inst : instances) {
        const auto it = by_id.find(inst.instance_id);
        PredictionResult r;
        if (it == by_id.end()) {
            r.instance_id = inst.instance_id;
            r.failed = true;
        } else {
            r = *it->second;
        }
        if (drop_halluc) r = drop_hallucinated(std::move(r));
        out.push_back(score(inst, r));
    }
    return out;
}

RunReport summarise_run(const std::vector<ScoredInstance>& scored, int run_index, const ScoreOptions& options) {
    RunReport r;
    r.run_index = run_index;
    r.n = scored.size();
    for (const auto& s : scored) {
        if (s.failed) ++r.failed_count;
        if (s.classification == OutputClass::EmptyUnusable) ++r.empty_count;
        if (s.classification == OutputClass::ContainsHallucination) ++r.halluc_count;
        if (!s.predicted_ids.empty()) ++r.parseable;
    }
    for (auto k : options.ks) r.acc[k] = acc_at_k(scored, k, options.denominator);
    return r;
}

std::optional<Aggregate> aggregate_runs(const std::vector<double>& values) {
    if (values.empty()) return std::nullopt;
    Aggregate a;
    a.runs = values.size();
    double sum = 0;
    for (double v : values) sum += v;
    a.mean = sum / static_cast<double>(values.size());
    if (values.size() == 1) {
        a.single_run = true;
        return a;
    }
    double ss = 0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return a;
}

void EvalReport::aggregate() {
    aggregates.clear();
    std::map<std::size_t, std::vector<double>> per_k;
    for (const auto& run : runs) {
        for (const auto& [k, v] : run.acc) {
            per_k[k];
            if (v) per_k[k].push_back(*v);
        }
    }
    for (auto& [k, values] : per_k) aggregates[k] = aggregate_runs(values);
}

std::optional<double> EvalReport::mean(std::size_t k) const {
    const auto it = aggregates.find(k);
    if (it == aggregates.end() || !it->second) return std::nullopt;
    return it->second->mean;
}

std::optional<double> relative_change(double value, double baseline) {
    if (baseline == 0) return std::nullopt;
    return (value - baseline) / baseline;
}

std::optional<std::vector<double>> AttributionReport::fractions() const {
    const auto t = static_cast<double>(total());
    if (t == 0) return std::nullopt;
    return std::vector<double>{both / t, history_only / t, context_only / t, neither / t};
}

AttributionReport attribute_sources(const std::vector<PredictionInstance>& instances,
                                    const std::vector<ScoredInstance>& scored, std::size_t k) {
    std::unordered_map<std::string, const PredictionInstance*> by_id;
    for (const auto& inst : instances) by_id.emplace(inst.instance_id, &inst);
    AttributionReport a;
    for (const auto& s : scored) {
        if (!s.hit(k)) continue;
        const auto it = by_id.find(s.instance_id);
        if (it == by_id.end()) throw DataError("scored instance " + s.instance_id + " has no matching instance");
        const auto& inst = *it->second;
        const auto in = [&](const std::vector<Visit>& vs) {
            return std::any_of(vs.begin(), vs.end(), [&](const Visit& v) { return v.location_id == s.target_id; });
        };
        const bool h = in(inst.historical), c = in(inst.contextual);
        if (h && c) ++a.both;
        else if (h) ++a.history_only;
        else if (c) ++a.context_only;
        else ++a.neither;
    }
    return a;
}

std::string AblationArm::label() const {
    return "C=" + std::to_string(context) + ",H=" + std::to_string(history);
}

std::vector<AblationArm> default_arms() {
    return {{6, 15}, {0, 15}, {3, 15}, {12, 15}, {6, 0}, {6, 7}, {6, 30}};
}

std::vector<PredictionInstance> rebuild_for_arm(const SegmentedDataset& dataset,
                                                const std::vector<PredictionInstance>& default_instances,
                                                const AblationArm& arm) {
    std::unordered_map<std::string, const UserTrajectories*> users;
    for (const auto& u : dataset.users) users.emplace(u.user_id, &u);
    std::vector<PredictionInstance> out;
    out.reserve(default_instances.size());
    for (const auto& inst : default_instances) {
        const auto it = users.find(inst.user_id);
        if (it == users.end()) throw DataError("instance " + inst.instance_id + " names unknown user " + inst.user_id);
        auto rebuilt = build_instance_at(*it->second, inst.trajectory_index, WindowSpec{arm.history, arm.context});
        if (rebuilt.instance_id != inst.instance_id) {
            throw DataError("instance " + inst.instance_id + " does not match the dataset it is rebuilt from");
        }
        out.push_back(std::move(rebuilt));
    }
    return out;
}

const ArmResult* AblationReport::find(const AblationArm& arm) const {
    for (const auto& a : arms) {
        if (a.arm == arm) return &a;
    }
    return nullptr;
}

void attach_relative_changes(AblationReport& report, const std::vector<std::size_t>& ks) {
    const auto* base = report.find(AblationArm{});
    if (!base) throw ConfigError("ablation grid must include the default arm C=6,H=15");
    const EvalReport baseline = base->report;
    for (auto& a : report.arms) {
        a.relative.clear();
        for (auto k : ks) {
            const auto v = a.report.mean(k);
            const auto b = baseline.mean(k);
            a.relative[k] = (v && b) ? relative_change(*v, *b) : std::nullopt;
        }
    }
}

AblationReport run_ablation(const SegmentedDataset& dataset, const std::vector<PredictionInstance>& default_instances,
                            const std::vector<AblationArm>& arms, const ArmEvaluator& evaluate,
                            const std::vector<std::size_t>& ks) {
    const auto def = std::find_if(arms.begin(), arms.end(), [](const AblationArm& a) { return a.is_default(); });
    if (def == arms.end()) throw ConfigError("ablation grid must include the default arm C=6,H=15");

    std::vector<std::future<EvalReport>> pending;
    pending.reserve(arms.size());
    for (const auto& arm : arms) {
        pending.push_back(std::async(std::launch::async, [&, arm] {
            auto instances = rebuild_for_arm(dataset, default_instances, arm);
            auto report = evaluate(arm, instances);
            report.context = arm.context;
            report.history = arm.history;
            return report;
        }));
    }

    AblationReport out;
    for (std::size_t i = 0; i < arms.size(); ++i) out.arms.push_back({arms[i], pending[i].get(), {}});
    attach_relative_changes(out, ks);
    return out;
}

}  // namespace nextloc
