// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nextloc/fileio.hpp"
#include "nextloc/ingest.hpp"

namespace nextloc {

enum class Perturbation { UserSwap, CategorySwap, VenueTail };

std::string to_string(Perturbation p);

struct PerturbationLog {
    char letter = 'A';
    Perturbation kind = Perturbation::UserSwap;
    std::vector<std::size_t> fields;  // 0-based columns that changed
    std::string detail;
};

struct QuizItem {
    std::string item_id;
    std::array<std::string, 4> options;  // A-D, tab-separated rows
    char correct_letter = 'A';
    std::size_t source_line = 0;  // line of the true row in the raw file
    std::vector<PerturbationLog> perturbations;

    /// Full model-facing text: instruction block, options A-E.
    std::string prompt(std::string_view dataset_label, std::string_view file_name) const;
};

inline constexpr std::string_view kNoneOption = "None of the provided options.";

struct QuizOptions {
    std::string dataset_label = "Foursquare NYC";
    std::string file_name = "dataset_TSMC2014_NYC.txt";
};

/// Items are drawn independently from per-item streams of `seed`. Throws
/// DataError when there are fewer than two users or two categories, or when
/// no distractor can avoid colliding with a real row.
std::vector<QuizItem> generate_quiz(const std::vector<CheckinRecord>& records, std::size_t n_items,
                                    std::uint64_t seed);

/// Model-facing file: prompt and options only.
std::string quiz_to_jsonl(const std::vector<QuizItem>& items, const QuizOptions& options = {});
/// Answer key: correct letter, source line and perturbation log.
std::string answer_key_to_jsonl(const std::vector<QuizItem>& items);

struct AnswerKey {
    std::string item_id;
    char correct_letter = 'A';
};
std::vector<AnswerKey> read_answer_key(const std::filesystem::path& path);

/// First explicit answer ("answer is B", "Answer: B", "option B", "(B)",
/// "B)") else a lone standalone capital A-E. Absent when nothing or several
/// conflicting letters are found.
std::optional<char> extract_letter(std::string_view text);

struct QuizResult {
    std::string model;
    std::size_t items = 0;
    std::size_t correct = 0;
    std::size_t incorrect = 0;
    std::size_t abstentions = 0;  // E answers, missing answers and unparseable answers
    std::size_t unparseable = 0;  // subset of abstentions
    static constexpr double kChanceFourWay = 0.25;
    static constexpr double kChanceFiveWay = 0.20;

    double accuracy() const { return items ? static_cast<double>(correct) / static_cast<double>(items) : 0.0; }
    Json to_json() const;
};

/// `answers` maps item_id to raw model text.
QuizResult score_quiz(const std::vector<AnswerKey>& key, const std::map<std::string, std::string>& answers,
                      const std::string& model);

struct UniformityTest {
    std::array<std::size_t, 4> counts{};
    double chi_square = 0;
    double p_value = 1;
};

/// Chi-square goodness of fit of the correct letters against uniform over A-D.
UniformityTest letter_uniformity(const std::vector<QuizItem>& items);

/// Upper tail of the chi-square distribution with three degrees of freedom.
double chi_square_sf_df3(double x);

}  // namespace nextloc
