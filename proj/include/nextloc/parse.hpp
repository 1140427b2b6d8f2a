// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "nextloc/fileio.hpp"
#include "nextloc/instances.hpp"

namespace nextloc {

/// What a location identifier looks like in free text.
///
/// The default matches Foursquare venue ids: lower-case hex, 20 to 28
/// characters. Datasets built from stop or grid ids supply a regex instead.
class IdShape {
public:
    IdShape() = default;
    explicit IdShape(const std::string& pattern);

    static IdShape foursquare() { return IdShape(); }

    bool matches(std::string_view token) const;
    const std::string& pattern() const { return pattern_; }

private:
    std::string pattern_ = "[0-9a-f]{20,28}";
    std::optional<std::regex> regex_;
};

enum class ExtractionStep { JsonObject, BracketList, TokenScan, None };

std::string to_string(ExtractionStep step);

struct Extraction {
    std::vector<std::string> ids;  // at most five, order and duplicates preserved
    std::optional<std::string> reason;
    ExtractionStep step = ExtractionStep::None;
};

/// Pulls a ranked id list out of arbitrary model text. Never throws.
///
///  1. the first well-formed JSON object whose "prediction" is an array with
///     at least one id-shaped string (all string entries are kept);
///  2. otherwise the first [...] list of quoted tokens that are all id-shaped;
///  3. otherwise every id-shaped token in reading order.
///
/// The reason comes from a "reason" key when present, else from free text
/// following the list.
Extraction extract(std::string_view text, const IdShape& shape = {});

enum class OutputClass { Valid, EmptyUnusable, ContainsHallucination };

std::string to_string(OutputClass c);
OutputClass parse_output_class(std::string_view s);

struct Vocabulary {
    std::unordered_set<std::string> ids;

    bool contains(const std::string& id) const { return ids.count(id) > 0; }

    static Vocabulary from_ids(const std::set<std::string>& ids);
    static Vocabulary from_file(const std::filesystem::path& path);  // one id per line
    std::string to_text() const;                                    // sorted, one per line
};

struct PredictionResult {
    std::string instance_id;
    std::string model;
    int run_index = 1;
    std::vector<std::string> predicted_ids;
    std::optional<std::string> reason;
    OutputClass classification = OutputClass::EmptyUnusable;
    std::vector<std::string> hallucinated_ids;  // predicted ids outside the vocabulary
    std::vector<std::string> novel_ids;         // predicted ids outside the instance's H and C
    bool failed = false;                        // no response could be obtained
};

PredictionResult classify(const Extraction& extraction, const Vocabulary& vocabulary,
                          const PredictionInstance& instance, const std::string& model, int run_index);

Json result_to_json(const PredictionResult& r);
PredictionResult result_from_json(const Json& j);
std::vector<PredictionResult> read_results(const std::filesystem::path& path);

}  // namespace nextloc
