// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nextloc/fileio.hpp"

namespace nextloc::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Every setting a command can use. Flags and the key=value config file both
/// map onto these fields; the whole struct is snapshotted into the manifest.
struct RunConfig {
    std::string command;

    std::string dataset;       // raw input file
    std::string dataset_name;  // defaults to the file stem
    std::string kind = "checkin";
    std::string location_id = "stop";
    std::string out = "out";

    std::string backend = "frequency-oracle";
    std::string model;
    std::string endpoint = "https://api.openai.com";
    std::string endpoint_path = "/v1/chat/completions";
    std::string api_key_env = "OPENAI_API_KEY";
    std::optional<double> temperature;
    std::optional<int> max_new_tokens;
    double rpm = 60;
    int max_retries = 5;
    int timeout_ms = 60000;
    std::size_t concurrency = 4;
    std::string cache;  // defaults to <out>/cache.jsonl

    std::string shots = "zero";
    std::size_t history = 15;
    std::size_t context = 6;
    int runs = 3;
    std::size_t sample_size = 0;  // 0 keeps every instance
    std::uint64_t seed = 42;
    std::string k = "1,3,5";
    std::string templates;
    std::string denominator = "all";
    bool drop_hallucinated = false;

    std::size_t min_records = 10;
    std::size_t min_trajectories = 5;
    double gap_hours = 72;
    double stay_radius_m = 65;
    double min_dwell_min = 5;
    double cluster_eps_m = 60;
    std::size_t cluster_min_pts = 1;
    double cell_size_m = 200;

    std::size_t quiz_items = 50;
    std::string quiz_label = "Foursquare NYC";
    std::string answers;

    std::vector<std::size_t> ks() const;
    Json to_json() const;
    void validate() const;
};

/// Parses argv (including --config), runs the chosen subcommand and returns
/// the process exit code: 0 ok, 1 unexpected, 2 configuration, 3 data, 4 auth.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

void cmd_prepare(const RunConfig& cfg, std::ostream& log);
void cmd_predict(const RunConfig& cfg, std::ostream& log);
void cmd_evaluate(const RunConfig& cfg, std::ostream& log);
void cmd_ablate(const RunConfig& cfg, std::ostream& log);
void cmd_quiz(const RunConfig& cfg, std::ostream& log);
void cmd_report(const RunConfig& cfg, std::ostream& log);

/// Directory name for one (model, shots, C, H) configuration.
std::string run_tag(const std::string& model, const std::string& shots, std::size_t context, std::size_t history);

/// Appends a manifest line to <out>/manifests.jsonl and returns its id.
std::string write_manifest(const std::filesystem::path& out_dir, const RunConfig& cfg, const std::string& dataset_hash,
                           Json details);

}  // namespace nextloc::cli
