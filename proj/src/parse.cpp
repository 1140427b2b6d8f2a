// SPDX-License-Identifier: Apache-2.0
#include "nextloc/parse.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "nextloc/error.hpp"

namespace nextloc {
namespace {

constexpr std::size_t kMaxIds = 5;
constexpr std::size_t kMaxObjectAttempts = 256;

bool is_token_char(char c) {
    const auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || c == '_' || c == '-';
}

std::size_t find_object_end(std::string_view text, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    bool escape = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escape) escape = false;
            else if (c == '\\') escape = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return i;
    }
    return std::string_view::npos;
}

std::string trim(std::string_view s, std::string_view lead, std::string_view trail) {
    while (!s.empty() && lead.find(s.front()) != std::string_view::npos) s.remove_prefix(1);
    while (!s.empty() && trail.find(s.back()) != std::string_view::npos) s.remove_suffix(1);
    return std::string(s);
}

std::optional<std::string> reason_from_key(std::string_view text) {
    static const std::regex key(R"rx("reason"\s*:\s*")rx");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(text.begin(), text.end(), m, key)) return std::nullopt;
    std::size_t i = static_cast<std::size_t>(m[0].second - text.begin());
    std::string out;
    bool escape = false;
    for (; i < text.size(); ++i) {
        const char c = text[i];
        if (escape) {
            out.push_back(c == 'n' ? '\n' : c);
            escape = false;
        } else if (c == '\\') {
            escape = true;
        } else if (c == '"') {
            break;
        } else {
            out.push_back(c);
        }
    }
    auto r = trim(out, " \t\r\n", " \t\r\n");
    if (r.empty()) return std::nullopt;
    return r;
}

std::optional<Extraction> from_json_objects(std::string_view text, const IdShape& shape) {
    std::size_t attempts = 0;
    for (auto open = text.find('{'); open != std::string_view::npos && attempts < kMaxObjectAttempts;
         open = text.find('{', open + 1), ++attempts) {
        const auto close = find_object_end(text, open);
        if (close == std::string_view::npos) continue;
        const auto parsed = Json::parse(text.substr(open, close - open + 1), nullptr, false);
        if (parsed.is_discarded() || !parsed.is_object()) continue;
        const auto it = parsed.find("prediction");
        if (it == parsed.end() || !it->is_array()) continue;
        Extraction ex;
        bool any_shaped = false;
        for (const auto& v : *it) {
            if (!v.is_string()) continue;
            auto id = v.get<std::string>();
            any_shaped = any_shaped || shape.matches(id);
            ex.ids.push_back(std::move(id));
        }
        if (!any_shaped) continue;
        ex.step = ExtractionStep::JsonObject;
        if (auto r = parsed.find("reason"); r != parsed.end() && r->is_string()) ex.reason = r->get<std::string>();
        return ex;
    }
    return std::nullopt;
}

// Parses the inside of [...] as quoted tokens separated by commas.
std::optional<std::vector<std::string>> quoted_tokens(std::string_view body) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < body.size()) {
        const char c = body[i];
        if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c != '"' && c != '\'') return std::nullopt;
        const auto end = body.find(c, i + 1);
        if (end == std::string_view::npos) return std::nullopt;
        out.emplace_back(body.substr(i + 1, end - i - 1));
        i = end + 1;
    }
    if (out.empty()) return std::nullopt;
    return out;
}

std::optional<Extraction> from_bracket_lists(std::string_view text, const IdShape& shape) {
    std::size_t open = text.find('[');
    while (open != std::string_view::npos) {
        const auto close = text.find(']', open + 1);
        if (close == std::string_view::npos) return std::nullopt;
        const auto inner_open = text.find('[', open + 1);
        if (inner_open != std::string_view::npos && inner_open < close) {
            open = inner_open;
            continue;
        }
        auto tokens = quoted_tokens(text.substr(open + 1, close - open - 1));
        if (tokens && std::all_of(tokens->begin(), tokens->end(),
                                  [&](const std::string& t) { return shape.matches(t); })) {
            Extraction ex;
            ex.step = ExtractionStep::BracketList;
            ex.ids = std::move(*tokens);
            ex.reason = reason_from_key(text.substr(close + 1));
            if (!ex.reason) {
                auto tail = trim(text.substr(close + 1), " \t\r\n.,;:", " \t\r\n\"}");
                if (!tail.empty()) ex.reason = std::move(tail);
            }
            return ex;
        }
        open = text.find('[', close + 1);
    }
    return std::nullopt;
}

Extraction from_token_scan(std::string_view text, const IdShape& shape) {
    Extraction ex;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_token_char(text[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && is_token_char(text[j])) ++j;
        const auto token = text.substr(i, j - i);
        if (shape.matches(token)) ex.ids.emplace_back(token);
        i = j;
    }
    if (!ex.ids.empty()) {
        ex.step = ExtractionStep::TokenScan;
        ex.reason = reason_from_key(text);
    }
    return ex;
}

}  // namespace

IdShape::IdShape(const std::string& pattern) : pattern_(pattern) {
    try {
        regex_.emplace(pattern);
    } catch (const std::regex_error& e) {
        throw ConfigError("invalid id pattern '" + pattern + "': " + e.what());
    }
}

bool IdShape::matches(std::string_view token) const {
    if (regex_) return std::regex_match(token.begin(), token.end(), *regex_);
    if (token.size() < 20 || token.size() > 28) return false;
    return std::all_of(token.begin(), token.end(),
                       [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

std::string to_string(ExtractionStep step) {
    switch (step) {
        case ExtractionStep::JsonObject: return "json_object";
        case ExtractionStep::BracketList: return "bracket_list";
        case ExtractionStep::TokenScan: return "token_scan";
        case ExtractionStep::None: return "none";
    }
    return "none";
}

Extraction extract(std::string_view text, const IdShape& shape) {
    Extraction ex;
    try {
        if (auto j = from_json_objects(text, shape)) ex = std::move(*j);
        else if (auto b = from_bracket_lists(text, shape)) ex = std::move(*b);
        else ex = from_token_scan(text, shape);
    } catch (...) {
        // Extraction is total; anything unexpected counts as "no ids".
        ex = Extraction{};
    }
    if (ex.ids.size() > kMaxIds) ex.ids.resize(kMaxIds);
    if (ex.reason && ex.reason->empty()) ex.reason.reset();
    return ex;
}

std::string to_string(OutputClass c) {
    switch (c) {
        case OutputClass::Valid: return "valid";
        case OutputClass::EmptyUnusable: return "empty_unusable";
        case OutputClass::ContainsHallucination: return "contains_hallucination";
    }
    return "empty_unusable";
}

OutputClass parse_output_class(std::string_view s) {
    if (s == "valid") return OutputClass::Valid;
    if (s == "empty_unusable") return OutputClass::EmptyUnusable;
    if (s == "contains_hallucination") return OutputClass::ContainsHallucination;
    throw DataError("unknown output class '" + std::string(s) + "'");
}

Vocabulary Vocabulary::from_ids(const std::set<std::string>& ids) {
    Vocabulary v;
    v.ids.insert(ids.begin(), ids.end());
    return v;
}

Vocabulary Vocabulary::from_file(const std::filesystem::path& path) {
    Vocabulary v;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) v.ids.insert(line);
    }
    return v;
}

std::string Vocabulary::to_text() const {
    std::vector<std::string> sorted(ids.begin(), ids.end());
    std::sort(sorted.begin(), sorted.end());
    std::string out;
    for (const auto& id : sorted) out += id + '\n';
    return out;
}

PredictionResult classify(const Extraction& extraction, const Vocabulary& vocabulary,
                          const PredictionInstance& instance, const std::string& model, int run_index) {
    PredictionResult r;
    r.instance_id = instance.instance_id;
    r.model = model;
    r.run_index = run_index;
    r.predicted_ids = extraction.ids;
    if (r.predicted_ids.size() > kMaxIds) r.predicted_ids.resize(kMaxIds);
    r.reason = extraction.reason;

    std::unordered_set<std::string> seen;
    for (const auto& v : instance.historical) seen.insert(v.location_id);
    for (const auto& v : instance.contextual) seen.insert(v.location_id);
    for (const auto& id : r.predicted_ids) {
        if (!vocabulary.contains(id) &&
            std::find(r.hallucinated_ids.begin(), r.hallucinated_ids.end(), id) == r.hallucinated_ids.end()) {
            r.hallucinated_ids.push_back(id);
        }
        if (!seen.count(id) && std::find(r.novel_ids.begin(), r.novel_ids.end(), id) == r.novel_ids.end()) {
            r.novel_ids.push_back(id);
        }
    }
    if (r.predicted_ids.empty()) r.classification = OutputClass::EmptyUnusable;
    else if (!r.hallucinated_ids.empty()) r.classification = OutputClass::ContainsHallucination;
    else r.classification = OutputClass::Valid;
    return r;
}

Json result_to_json(const PredictionResult& r) {
    return {{"instance_id", r.instance_id},
            {"model", r.model},
            {"run_index", r.run_index},
            {"predicted_ids", r.predicted_ids},
            {"reason", r.reason ? Json(*r.reason) : Json(nullptr)},
            {"classification", to_string(r.classification)},
            {"hallucinated_ids", r.hallucinated_ids},
            {"novel_ids", r.novel_ids},
            {"failed", r.failed}};
}

PredictionResult result_from_json(const Json& j) {
    PredictionResult r;
    r.instance_id = j.at("instance_id").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.run_index = j.at("run_index").get<int>();
    r.predicted_ids = j.at("predicted_ids").get<std::vector<std::string>>();
    if (j.contains("reason") && j.at("reason").is_string()) r.reason = j.at("reason").get<std::string>();
    r.classification = parse_output_class(j.at("classification").get<std::string>());
    r.hallucinated_ids = j.value("hallucinated_ids", std::vector<std::string>{});
    r.novel_ids = j.value("novel_ids", std::vector<std::string>{});
    r.failed = j.value("failed", false);
    return r;
}

std::vector<PredictionResult> read_results(const std::filesystem::path& path) {
    std::vector<PredictionResult> out;
    for (const auto& j : read_jsonl(path)) out.push_back(result_from_json(j));
    return out;
}

}  // namespace nextloc
