// SPDX-License-Identifier: Apache-2.0
#include "nextloc/contamination.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_set>

#include "nextloc/error.hpp"
#include "nextloc/rng.hpp"

namespace nextloc {
namespace {

constexpr int kMaxAttempts = 64;
constexpr std::size_t kUserField = 0, kVenueField = 1, kCategoryIdField = 2, kCategoryField = 3;

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out(1);
    for (char c : line) {
        if (c == '\t') out.emplace_back();
        else out.back().push_back(c);
    }
    return out;
}

std::string join_tabs(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back('\t');
        out += fields[i];
    }
    return out;
}

std::string tail_alphabet(const std::string& id) {
    const bool hex = std::all_of(id.begin(), id.end(),
                                 [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
    if (hex) return "0123456789abcdef";
    std::string a;
    if (std::any_of(id.begin(), id.end(), [](char c) { return c >= '0' && c <= '9'; })) a += "0123456789";
    if (std::any_of(id.begin(), id.end(), [](char c) { return c >= 'a' && c <= 'z'; })) a += "abcdefghijklmnopqrstuvwxyz";
    if (std::any_of(id.begin(), id.end(), [](char c) { return c >= 'A' && c <= 'Z'; })) a += "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
    return a.empty() ? "0123456789abcdef" : a;
}

struct Material {
    std::vector<std::string> users;
    std::vector<std::pair<std::string, std::string>> categories;  // (id, label)
    std::unordered_set<std::string> raw_rows;
};

std::string pad_index(std::size_t i) {
    std::string s = std::to_string(i + 1);
    return "q" + std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

std::optional<char> first_group(const std::string& text, const std::regex& re) {
    std::smatch m;
    if (!std::regex_search(text, m, re)) return std::nullopt;
    return m[1].str()[0];
}

}  // namespace

std::string to_string(Perturbation p) {
    switch (p) {
        case Perturbation::UserSwap: return "user_swap";
        case Perturbation::CategorySwap: return "category_swap";
        case Perturbation::VenueTail: return "venue_tail";
    }
    return "user_swap";
}

std::string QuizItem::prompt(std::string_view dataset_label, std::string_view file_name) const {
    std::ostringstream o;
    o << "Instruction: You are provided with a four-choice quiz. Your task is to correctly select the option "
         "corresponding to an instance from the "
      << dataset_label << " (\"" << file_name << "\") dataset.\n\n"
      << "When selecting the option, you must ensure that you follow the following rules:\n"
      << "1. You must ensure that you only generate a single option letter as your answer.\n"
      << "2. If you do not know the dataset or the correct answer, you must select option \"E) " << kNoneOption
      << "\"\n\n"
      << "Hint: While all the following options seem similar, there is only one option that reflects an exact match "
         "with respect to the original instance.\n\n"
      << "Options:\n";
    for (std::size_t i = 0; i < options.size(); ++i) {
        o << static_cast<char>('A' + i) << ") " << to_valid_utf8(options[i]) << '\n';
    }
    o << "E) " << kNoneOption;
    return o.str();
}

std::vector<QuizItem> generate_quiz(const std::vector<CheckinRecord>& records, std::size_t n_items,
                                    std::uint64_t seed) {
    if (records.empty()) throw DataError("quiz needs a non-empty dataset");
    Material mat;
    {
        std::set<std::string> users;
        std::set<std::pair<std::string, std::string>> cats;
        for (const auto& r : records) {
            users.insert(r.user_id);
            cats.emplace(r.venue_category_id, r.venue_category);
            mat.raw_rows.insert(r.raw_line);
        }
        mat.users.assign(users.begin(), users.end());
        mat.categories.assign(cats.begin(), cats.end());
    }
    if (mat.users.size() < 2) throw DataError("quiz needs at least two distinct users");
    {
        std::set<std::string> labels;
        for (const auto& c : mat.categories) labels.insert(c.second);
        if (labels.size() < 2) throw DataError("quiz needs at least two distinct venue categories");
    }

    std::vector<QuizItem> items;
    items.reserve(n_items);
    for (std::size_t n = 0; n < n_items; ++n) {
        auto rng = SeededRng::derived(seed, "quiz-item-" + std::to_string(n));
        const auto& truth = records[rng.below(records.size())];
        const auto fields = split_tabs(truth.raw_line);
        if (fields.size() != 8) throw DataError("row on line " + std::to_string(truth.line_no) + " is not 8 fields");

        QuizItem item;
        item.item_id = pad_index(n);
        item.source_line = truth.line_no;
        item.correct_letter = static_cast<char>('A' + rng.below(4));

        std::vector<Perturbation> kinds = {Perturbation::UserSwap, Perturbation::CategorySwap,
                                           Perturbation::VenueTail};
        rng.shuffle(kinds);

        std::vector<std::string> distractors;
        std::vector<PerturbationLog> logs;
        for (auto kind : kinds) {
            bool done = false;
            for (int attempt = 0; attempt < kMaxAttempts && !done; ++attempt) {
                auto f = fields;
                PerturbationLog log;
                log.kind = kind;
                switch (kind) {
                    case Perturbation::UserSwap: {
                        std::string other;
                        do other = mat.users[rng.below(mat.users.size())];
                        while (other == f[kUserField]);
                        log.detail = f[kUserField] + " -> " + other;
                        f[kUserField] = other;
                        log.fields = {kUserField};
                        break;
                    }
                    case Perturbation::CategorySwap: {
                        std::pair<std::string, std::string> other;
                        do other = mat.categories[rng.below(mat.categories.size())];
                        while (other.second == f[kCategoryField]);
                        log.detail = f[kCategoryField] + " -> " + other.second;
                        log.fields = {kCategoryField};
                        if (other.first != f[kCategoryIdField]) log.fields.insert(log.fields.begin(), kCategoryIdField);
                        f[kCategoryIdField] = other.first;
                        f[kCategoryField] = other.second;
                        break;
                    }
                    case Perturbation::VenueTail: {
                        auto& id = f[kVenueField];
                        const auto alphabet = tail_alphabet(id);
                        const std::size_t len = std::min<std::size_t>(id.size(), 4 + rng.below(5));
                        const auto before = id;
                        do {
                            for (std::size_t i = id.size() - len; i < id.size(); ++i) {
                                id[i] = alphabet[rng.below(alphabet.size())];
                            }
                        } while (id == before);
                        log.detail = "last " + std::to_string(len) + " characters: " + before + " -> " + id;
                        log.fields = {kVenueField};
                        break;
                    }
                }
                auto row = join_tabs(f);
                if (mat.raw_rows.count(row) ||
                    std::find(distractors.begin(), distractors.end(), row) != distractors.end()) {
                    continue;
                }
                distractors.push_back(std::move(row));
                logs.push_back(std::move(log));
                done = true;
            }
            if (!done) {
                throw DataError("could not build a " + to_string(kind) + " distractor for line " +
                                std::to_string(truth.line_no) + " that differs from every real row");
            }
        }

        std::size_t d = 0;
        for (std::size_t slot = 0; slot < 4; ++slot) {
            const char letter = static_cast<char>('A' + slot);
            if (letter == item.correct_letter) {
                item.options[slot] = truth.raw_line;
                continue;
            }
            item.options[slot] = distractors[d];
            logs[d].letter = letter;
            item.perturbations.push_back(logs[d]);
            ++d;
        }
        items.push_back(std::move(item));
    }
    return items;
}

std::string quiz_to_jsonl(const std::vector<QuizItem>& items, const QuizOptions& options) {
    std::vector<Json> out;
    for (const auto& item : items) {
        Json opts = Json::object();
        for (std::size_t i = 0; i < 4; ++i) opts[std::string(1, static_cast<char>('A' + i))] = to_valid_utf8(item.options[i]);
        opts["E"] = kNoneOption;
        out.push_back({{"item_id", item.item_id},
                       {"options", opts},
                       {"prompt", item.prompt(options.dataset_label, options.file_name)}});
    }
    return to_jsonl(out);
}

std::string answer_key_to_jsonl(const std::vector<QuizItem>& items) {
    std::vector<Json> out;
    for (const auto& item : items) {
        Json logs = Json::array();
        for (const auto& p : item.perturbations) {
            logs.push_back({{"letter", std::string(1, p.letter)},
                            {"kind", to_string(p.kind)},
                            {"fields", p.fields},
                            {"detail", to_valid_utf8(p.detail)}});
        }
        out.push_back({{"item_id", item.item_id},
                       {"correct_letter", std::string(1, item.correct_letter)},
                       {"source_line", item.source_line},
                       {"perturbations", logs}});
    }
    return to_jsonl(out);
}

std::vector<AnswerKey> read_answer_key(const std::filesystem::path& path) {
    std::vector<AnswerKey> out;
    for (const auto& j : read_jsonl(path)) {
        const auto letter = j.at("correct_letter").get<std::string>();
        if (letter.size() != 1 || letter[0] < 'A' || letter[0] > 'D') {
            throw DataError(path.string() + ": bad correct_letter '" + letter + "'");
        }
        out.push_back({j.at("item_id").get<std::string>(), letter[0]});
    }
    return out;
}

std::optional<char> extract_letter(std::string_view text_view) {
    static const std::vector<std::regex> explicit_forms = {
        std::regex(R"((?:[Aa]nswer|ANSWER)(?:\s+is)?\s*:?\s*(?:[Oo]ption\s*)?\(?([A-E])\b)"),
        std::regex(R"((?:[Oo]ption|[Cc]hoice)\s*\(?([A-E])\b)"),
        std::regex(R"(\(([A-E])\))"),
        std::regex(R"((?:^|\s)([A-E])\))"),
    };
    static const std::regex standalone(R"(\b([A-E])\b)");
    const std::string text(text_view);
    for (const auto& re : explicit_forms) {
        if (auto c = first_group(text, re)) return c;
    }
    std::set<char> seen;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), standalone); it != std::sregex_iterator(); ++it) {
        seen.insert((*it)[1].str()[0]);
    }
    if (seen.size() == 1) return *seen.begin();
    return std::nullopt;
}

Json QuizResult::to_json() const {
    return {{"model", model},
            {"items", items},
            {"correct", correct},
            {"incorrect", incorrect},
            {"abstentions", abstentions},
            {"unparseable", unparseable},
            {"accuracy", accuracy()},
            {"chance_four_way", kChanceFourWay},
            {"chance_five_way", kChanceFiveWay}};
}

QuizResult score_quiz(const std::vector<AnswerKey>& key, const std::map<std::string, std::string>& answers,
                      const std::string& model) {
    QuizResult r;
    r.model = model;
    for (const auto& k : key) {
        ++r.items;
        const auto it = answers.find(k.item_id);
        const auto letter = it == answers.end() ? std::nullopt : extract_letter(it->second);
        if (!letter) {
            ++r.abstentions;
            ++r.unparseable;
        } else if (*letter == 'E') {
            ++r.abstentions;
        } else if (*letter == k.correct_letter) {
            ++r.correct;
        } else {
            ++r.incorrect;
        }
    }
    return r;
}

double chi_square_sf_df3(double x) {
    if (x <= 0) return 1.0;
    return std::erfc(std::sqrt(x / 2)) + std::sqrt(2 * x / std::numbers::pi) * std::exp(-x / 2);
}

UniformityTest letter_uniformity(const std::vector<QuizItem>& items) {
    UniformityTest t;
    for (const auto& item : items) ++t.counts[static_cast<std::size_t>(item.correct_letter - 'A')];
    if (items.empty()) return t;
    const double expected = static_cast<double>(items.size()) / 4.0;
    for (auto c : t.counts) t.chi_square += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
    t.p_value = chi_square_sf_df3(t.chi_square);
    return t;
}

}  // namespace nextloc
