// SPDX-License-Identifier: Apache-2.0
#include "nextloc/prompts.hpp"

#include <algorithm>
#include <set>

#include "nextloc/error.hpp"
#include "nextloc/fileio.hpp"
#include "nextloc/hash.hpp"
#include "nextloc/ranking.hpp"
#include "nextloc/rng.hpp"

namespace nextloc {

namespace builtin_templates {
extern const std::string_view kZeroShot;
extern const std::string_view kOneShot;
extern const std::string_view kFewShot;
extern const std::string_view kFewShotExample;
}  // namespace builtin_templates

namespace {

constexpr std::string_view kDefaultExemplarReason =
    "The first place is where the user went next; the others are the places visited most often in the "
    "historical and context stays.";

std::string time_text(const Visit& v, TimeFormat fmt) {
    return fmt == TimeFormat::Hour ? v.hour_label : minute_label(v.local_time);
}

std::string quoted_list(const std::vector<std::string>& ids, std::string_view sep) {
    std::string out = "[";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i > 0) out += sep;
        out += "'" + ids[i] + "'";
    }
    return out + "]";
}

}  // namespace

std::string to_string(Shots s) {
    switch (s) {
        case Shots::Zero: return "zero";
        case Shots::One: return "one";
        case Shots::Few: return "few";
    }
    return "zero";
}

Shots parse_shots(std::string_view s) {
    if (s == "zero") return Shots::Zero;
    if (s == "one") return Shots::One;
    if (s == "few") return Shots::Few;
    throw ConfigError("shots must be zero, one or few; got '" + std::string(s) + "'");
}

Exemplar make_exemplar(const PredictionInstance& inst) {
    Exemplar ex;
    ex.historical = inst.historical;
    ex.contextual = inst.contextual;
    ex.prediction.push_back(inst.target.location_id);
    std::vector<Visit> seen = inst.historical;
    seen.insert(seen.end(), inst.contextual.begin(), inst.contextual.end());
    for (const auto& id : rank_by_frequency(seen, seen.size())) {
        if (ex.prediction.size() >= kTopK) break;
        if (id != inst.target.location_id) ex.prediction.push_back(id);
    }
    ex.reason = kDefaultExemplarReason;
    return ex;
}

PromptTemplate PromptTemplate::from_file(const std::filesystem::path& path) {
    auto text = read_file(path);
    // Editors like to add a final newline; the built-in templates have none.
    if (!text.empty() && text.back() == '\n') text.pop_back();
    return {std::move(text)};
}

std::string PromptTemplate::fill(const std::map<std::string, std::string>& values) const {
    std::string out;
    out.reserve(text.size() * 2);
    std::set<std::string> used;
    std::size_t pos = 0;
    while (true) {
        const auto open = text.find("{{", pos);
        if (open == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        const auto close = text.find("}}", open + 2);
        if (close == std::string::npos) throw ConfigError("unterminated placeholder in prompt template");
        const auto name = text.substr(open + 2, close - open - 2);
        auto it = values.find(name);
        if (it == values.end()) throw ConfigError("prompt template uses unknown placeholder '" + name + "'");
        out.append(text, pos, open - pos);
        out += it->second;
        used.insert(name);
        pos = close + 2;
    }
    for (const auto& [name, value] : values) {
        if (!used.count(name)) throw ConfigError("prompt template is missing placeholder '" + name + "'");
    }
    return out;
}

const TemplateSet& TemplateSet::builtin() {
    static const TemplateSet set{{std::string(builtin_templates::kZeroShot)},
                                 {std::string(builtin_templates::kOneShot)},
                                 {std::string(builtin_templates::kFewShot)},
                                 {std::string(builtin_templates::kFewShotExample)}};
    return set;
}

TemplateSet TemplateSet::from_directory(const std::filesystem::path& dir) {
    return {PromptTemplate::from_file(dir / "zero_shot.txt"), PromptTemplate::from_file(dir / "one_shot.txt"),
            PromptTemplate::from_file(dir / "few_shot.txt"), PromptTemplate::from_file(dir / "few_shot_example.txt")};
}

std::string format_stay(const Visit& v, TimeFormat fmt) {
    return "['" + time_text(v, fmt) + "', '" + v.day_of_week + "', '" + v.location_id + "']";
}

std::string format_stay_block(const std::vector<Visit>& visits, TimeFormat fmt) {
    std::string out = "{";
    for (std::size_t i = 0; i < visits.size(); ++i) {
        if (i > 0) out += ",\n  ";
        out += format_stay(visits[i], fmt);
    }
    return out + "}";
}

std::string format_stay_inline(const std::vector<Visit>& visits, TimeFormat fmt) {
    std::string out = "{";
    for (std::size_t i = 0; i < visits.size(); ++i) {
        if (i > 0) out += ", ";
        out += format_stay(visits[i], fmt);
    }
    return out + "}";
}

std::size_t required_exemplars(Shots shots) {
    switch (shots) {
        case Shots::Zero: return 0;
        case Shots::One: return 1;
        case Shots::Few: return 2;
    }
    return 0;
}

RenderedPrompt render(const PredictionInstance& instance, Shots shots, const std::vector<Exemplar>& exemplars,
                      const RenderOptions& options, const TemplateSet& templates) {
    const std::size_t needed = required_exemplars(shots);
    if (exemplars.size() < needed) {
        throw ConfigError(to_string(shots) + "-shot prompt needs " + std::to_string(needed) + " exemplar(s), got " +
                          std::to_string(exemplars.size()));
    }

    RenderedPrompt out;
    out.instance_id = instance.instance_id;
    out.shots = shots;
    out.h_count = instance.historical.size();
    out.c_count = instance.contextual.size();

    switch (shots) {
        case Shots::Zero:
            out.text = templates.zero_shot.fill({
                {"historical_stays", format_stay_block(instance.historical, options.query_time)},
                {"context_stays", format_stay_block(instance.contextual, options.query_time)},
            });
            break;
        case Shots::One: {
            const auto& ex = exemplars.front();
            out.text = templates.one_shot.fill({
                {"example_historical_stays", format_stay_block(ex.historical, options.query_time)},
                {"example_context_stays", format_stay_block(ex.contextual, options.query_time)},
                {"example_prediction", "{" + quoted_list(ex.prediction, ",\n") + "}"},
                {"example_reason", ex.reason},
                {"historical_stays", format_stay_block(instance.historical, options.query_time)},
                {"context_stays", format_stay_block(instance.contextual, options.query_time)},
            });
            break;
        }
        case Shots::Few: {
            std::string examples;
            for (std::size_t i = 0; i < exemplars.size(); ++i) {
                if (i > 0) examples += '\n';
                const auto& ex = exemplars[i];
                examples += templates.few_shot_example.fill({
                    {"example_number", std::to_string(i + 1)},
                    {"example_historical_stays", format_stay_inline(ex.historical, options.few_shot_example_time)},
                    {"example_context_stays", format_stay_inline(ex.contextual, options.few_shot_example_time)},
                    {"example_prediction", quoted_list(ex.prediction, ", ")},
                });
            }
            out.text = templates.few_shot.fill({
                {"examples", examples},
                {"historical_stays", format_stay_inline(instance.historical, options.query_time)},
                {"context_stays", format_stay_inline(instance.contextual, options.query_time)},
            });
            break;
        }
    }
    out.content_hash = sha256_hex(out.text);
    return out;
}

std::vector<Exemplar> pick_exemplars(const PredictionInstance& instance,
                                     const std::map<std::string, std::vector<PredictionInstance>>& by_user,
                                     const std::vector<PredictionInstance>& fallback_pool, std::size_t count,
                                     std::uint64_t seed) {
    std::vector<Exemplar> out;
    if (count == 0) return out;
    auto rng = SeededRng::derived(seed, instance.instance_id);
    auto it = by_user.find(instance.user_id);
    if (it != by_user.end()) {
        for (auto i : rng.sample_indices(it->second.size(), count)) out.push_back(make_exemplar(it->second[i]));
        // Keep the user's own examples in a seeded, not chronological, order.
        rng.shuffle(out);
    }
    if (out.size() < count) {
        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < fallback_pool.size(); ++i) {
            if (fallback_pool[i].user_id != instance.user_id) candidates.push_back(i);
        }
        for (auto k : rng.sample_indices(candidates.size(), count - out.size())) {
            out.push_back(make_exemplar(fallback_pool[candidates[k]]));
        }
    }
    return out;
}

}  // namespace nextloc
