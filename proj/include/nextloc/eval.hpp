// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nextloc/instances.hpp"
#include "nextloc/parse.hpp"

namespace nextloc {

inline const std::vector<std::size_t> kDefaultKs = {1, 3, 5};

struct ScoredInstance {
    std::string instance_id;
    std::string target_id;
    std::vector<std::string> predicted_ids;
    std::optional<std::size_t> rank_of_target;  // 1-based, first occurrence
    OutputClass classification = OutputClass::EmptyUnusable;
    bool failed = false;

    bool hit(std::size_t k) const { return rank_of_target && *rank_of_target <= k; }
};

ScoredInstance score(const PredictionInstance& instance, const PredictionResult& result);

/// Result with every hallucinated id removed, reclassified as valid or empty.
PredictionResult drop_hallucinated(PredictionResult result);

/// All: every prompted instance counts (unusable outputs are misses).
/// Parseable: only instances whose output yielded at least one id.
enum class Denominator { All, Parseable };

std::string to_string(Denominator d);
Denominator parse_denominator(std::string_view s);

/// Absent when the denominator is zero.
std::optional<double> acc_at_k(const std::vector<ScoredInstance>& scored, std::size_t k,
                               Denominator denominator = Denominator::All);

struct RunReport {
    int run_index = 1;
    std::map<std::size_t, std::optional<double>> acc;  // k -> ACC@k
    std::size_t n = 0;
    std::size_t parseable = 0;
    std::size_t empty_count = 0;
    std::size_t halluc_count = 0;
    std::size_t failed_count = 0;
};

struct ScoreOptions {
    std::vector<std::size_t> ks = kDefaultKs;
    Denominator denominator = Denominator::All;
    bool drop_hallucinated = false;
};

/// Scores one run. Instances without a result count as failed, empty outputs.
std::vector<ScoredInstance> score_run(const std::vector<PredictionInstance>& instances,
                                      const std::vector<PredictionResult>& results, bool drop_halluc = false);
RunReport summarise_run(const std::vector<ScoredInstance>& scored, int run_index, const ScoreOptions& options);

struct Aggregate {
    double mean = 0;
    double sd = 0;          // sample standard deviation (n - 1)
    std::size_t runs = 0;
    bool single_run = false;  // sd is reported as 0 and carries no information
};

/// Absent for an empty list.
std::optional<Aggregate> aggregate_runs(const std::vector<double>& values);

struct EvalReport {
    std::string model;
    std::string dataset;
    std::string shots;
    std::size_t context = 6;
    std::size_t history = 15;
    std::vector<RunReport> runs;
    std::map<std::size_t, std::optional<Aggregate>> aggregates;  // k -> over runs

    void aggregate();
    std::optional<double> mean(std::size_t k) const;
};

/// (value - baseline) / baseline; absent when baseline is 0.
std::optional<double> relative_change(double value, double baseline);

struct AttributionReport {
    std::size_t both = 0;
    std::size_t history_only = 0;
    std::size_t context_only = 0;
    std::size_t neither = 0;

    std::size_t total() const { return both + history_only + context_only + neither; }
    /// Fractions in the order both, history_only, context_only, neither; absent when total is 0.
    std::optional<std::vector<double>> fractions() const;
};

/// Buckets correct predictions (hit@k) by where their target appeared.
AttributionReport attribute_sources(const std::vector<PredictionInstance>& instances,
                                    const std::vector<ScoredInstance>& scored, std::size_t k = 5);

struct AblationArm {
    std::size_t context = 6;
    std::size_t history = 15;

    bool is_default() const { return context == 6 && history == 15; }
    std::string label() const;
    friend bool operator==(const AblationArm&, const AblationArm&) = default;
};

/// (C=6,H=15), C in {0,3,12} with H=15, H in {0,7,30} with C=6.
std::vector<AblationArm> default_arms();

/// Rebuilds each default-arm instance for `arm`, keeping ids and targets.
std::vector<PredictionInstance> rebuild_for_arm(const SegmentedDataset& dataset,
                                                const std::vector<PredictionInstance>& default_instances,
                                                const AblationArm& arm);

struct ArmResult {
    AblationArm arm;
    EvalReport report;
    std::map<std::size_t, std::optional<double>> relative;  // k -> change of mean vs default arm
};

struct AblationReport {
    std::vector<ArmResult> arms;
    const ArmResult* find(const AblationArm& arm) const;
};

/// Fills ArmResult::relative for every arm against the default arm's mean ACC@k.
void attach_relative_changes(AblationReport& report, const std::vector<std::size_t>& ks = kDefaultKs);

using ArmEvaluator = std::function<EvalReport(const AblationArm&, const std::vector<PredictionInstance>&)>;

/// Evaluates every arm (concurrently) and attaches relative changes against
/// the default arm. `arms` must contain the default arm.
AblationReport run_ablation(const SegmentedDataset& dataset, const std::vector<PredictionInstance>& default_instances,
                            const std::vector<AblationArm>& arms, const ArmEvaluator& evaluate,
                            const std::vector<std::size_t>& ks = kDefaultKs);

}  // namespace nextloc
