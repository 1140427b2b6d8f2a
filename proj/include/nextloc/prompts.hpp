// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nextloc/instances.hpp"

namespace nextloc {

enum class Shots { Zero, One, Few };

std::string to_string(Shots s);
Shots parse_shots(std::string_view s);

/// How a stay's time is printed: "6 PM" or "06:49 PM".
enum class TimeFormat { Hour, Minute };

/// A worked example placed ahead of the query in one- and few-shot prompts.
struct Exemplar {
    std::vector<Visit> historical;
    std::vector<Visit> contextual;
    std::vector<std::string> prediction;  // ids shown as the expected answer
    std::string reason;                   // one-shot only
};

/// Expected answer for a training instance: its true target first, then the
/// most frequent other ids from its own history and context.
Exemplar make_exemplar(const PredictionInstance& training_instance);

/// Plain text with `{{name}}` placeholders.
struct PromptTemplate {
    std::string text;

    static PromptTemplate from_file(const std::filesystem::path& path);

    /// Replaces every placeholder; throws ConfigError on an unknown or unused name.
    std::string fill(const std::map<std::string, std::string>& values) const;
};

/// The four templates shared by every model.
struct TemplateSet {
    PromptTemplate zero_shot;
    PromptTemplate one_shot;
    PromptTemplate few_shot;
    PromptTemplate few_shot_example;

    static const TemplateSet& builtin();

    /// Loads zero_shot.txt, one_shot.txt, few_shot.txt, few_shot_example.txt from `dir`.
    static TemplateSet from_directory(const std::filesystem::path& dir);
};

struct RenderOptions {
    TimeFormat query_time = TimeFormat::Hour;
    TimeFormat few_shot_example_time = TimeFormat::Minute;
};

struct RenderedPrompt {
    std::string text;
    std::string instance_id;
    Shots shots = Shots::Zero;
    std::size_t h_count = 0;
    std::size_t c_count = 0;
    std::string content_hash;  // sha256 of text
};

/// "['6 PM', 'Sunday', '42ec1480f964a5209e261fe3']"
std::string format_stay(const Visit& v, TimeFormat fmt);

/// Multi-line block "{[...],\n  [...]}" as used by zero- and one-shot prompts; "{}" when empty.
std::string format_stay_block(const std::vector<Visit>& visits, TimeFormat fmt);

/// Single-line block "{[...], [...]}" as used by few-shot prompts.
std::string format_stay_inline(const std::vector<Visit>& visits, TimeFormat fmt);

/// One-shot needs one exemplar, few-shot at least two; throws ConfigError otherwise.
RenderedPrompt render(const PredictionInstance& instance, Shots shots, const std::vector<Exemplar>& exemplars = {},
                      const RenderOptions& options = {}, const TemplateSet& templates = TemplateSet::builtin());

std::size_t required_exemplars(Shots shots);

/// Seeded choice of `count` exemplars for `instance`, preferring the same
/// user's training instances and topping up from `fallback_pool` otherwise.
std::vector<Exemplar> pick_exemplars(const PredictionInstance& instance,
                                     const std::map<std::string, std::vector<PredictionInstance>>& by_user,
                                     const std::vector<PredictionInstance>& fallback_pool, std::size_t count,
                                     std::uint64_t seed);

}  // namespace nextloc
