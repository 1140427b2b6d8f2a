// SPDX-License-Identifier: Apache-2.0
#include "nextloc/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "nextloc/error.hpp"
#include "nextloc/fileio.hpp"

namespace nextloc {
namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size() && std::isfinite(out);
}

bool parse_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

std::size_t utf8_sequence_length(std::string_view s, std::size_t i) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    if (c < 0x80) return 1;
    if ((c & 0xE0) == 0xC0 && c >= 0xC2) len = 2;
    else if ((c & 0xF0) == 0xE0) len = 3;
    else if ((c & 0xF8) == 0xF0 && c <= 0xF4) len = 4;
    else return 0;
    if (i + len > s.size()) return 0;
    for (std::size_t k = 1; k < len; ++k) {
        if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return 0;
    }
    return len;
}

}  // namespace

LocalTime CheckinRecord::local_time() const {
    return LocalTime{utc_timestamp.time_since_epoch() + std::chrono::minutes{tz_offset_minutes}};
}

Visit Visit::at(LocalTime t, std::string location_id) {
    return Visit{t, nextloc::hour_label(t), nextloc::day_name(t), std::move(location_id)};
}

void Dataset::rebuild_vocabulary() {
    vocabulary.clear();
    for (const auto& u : users) {
        for (const auto& v : u.visits) vocabulary.insert(v.location_id);
    }
}

std::size_t Dataset::visit_count() const {
    std::size_t n = 0;
    for (const auto& u : users) n += u.visits.size();
    return n;
}

bool parse_checkin_row(std::string_view line, CheckinRecord& out, std::string& reason) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
        reason = "empty line";
        return false;
    }
    const auto f = split_tabs(line);
    if (f.size() != 8) {
        reason = "expected 8 tab-separated fields, found " + std::to_string(f.size());
        return false;
    }
    if (f[0].empty() || f[1].empty()) {
        reason = "empty user or venue id";
        return false;
    }
    CheckinRecord r;
    r.user_id = f[0];
    r.venue_id = f[1];
    r.venue_category_id = f[2];
    r.venue_category = f[3];
    if (!parse_double(f[4], r.latitude) || r.latitude < -90.0 || r.latitude > 90.0) {
        reason = "invalid latitude";
        return false;
    }
    if (!parse_double(f[5], r.longitude) || r.longitude < -180.0 || r.longitude > 180.0) {
        reason = "invalid longitude";
        return false;
    }
    if (!parse_int(f[6], r.tz_offset_minutes) || std::abs(r.tz_offset_minutes) > 18 * 60) {
        reason = "invalid timezone offset";
        return false;
    }
    const auto ts = parse_checkin_timestamp(f[7]);
    if (!ts) {
        reason = "invalid timestamp";
        return false;
    }
    r.utc_timestamp = *ts;
    r.raw_line = std::string(line);
    out = std::move(r);
    return true;
}

CheckinParseResult parse_checkin_text(std::string_view text, std::string name) {
    CheckinParseResult result;
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        ++result.rows_in_file;
        CheckinRecord rec;
        std::string reason;
        if (parse_checkin_row(line, rec, reason)) {
            rec.line_no = line_no;
            result.records.push_back(std::move(rec));
        } else {
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            result.rejects.push_back({line_no, std::string(line), std::move(reason)});
        }
    }
    if (result.records.empty()) {
        throw DataError("no check-in rows parsed (" + std::to_string(result.rows_in_file) + " rows, " +
                        std::to_string(result.rejects.size()) + " rejected)");
    }
    result.dataset = build_dataset(std::move(name), result.records);
    return result;
}

CheckinParseResult parse_checkin_file(const std::filesystem::path& path, std::string name) {
    const auto text = read_file(path);
    if (name.empty()) name = path.stem().string();
    try {
        return parse_checkin_text(text, std::move(name));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

Dataset build_dataset(std::string name, const std::vector<CheckinRecord>& records) {
    std::map<std::string, std::vector<const CheckinRecord*>> by_user;
    for (const auto& r : records) by_user[r.user_id].push_back(&r);

    Dataset ds;
    ds.name = std::move(name);
    ds.users.reserve(by_user.size());
    for (auto& [user, recs] : by_user) {
        // Ties on local time fall back to the raw row so input order never matters.
        std::sort(recs.begin(), recs.end(), [](const CheckinRecord* a, const CheckinRecord* b) {
            const auto ta = a->local_time();
            const auto tb = b->local_time();
            if (ta != tb) return ta < tb;
            return a->raw_line < b->raw_line;
        });
        UserHistory h;
        h.user_id = user;
        h.visits.reserve(recs.size());
        for (const auto* r : recs) h.visits.push_back(Visit::at(r->local_time(), r->venue_id));
        ds.users.push_back(std::move(h));
    }
    ds.rebuild_vocabulary();
    return ds;
}

Dataset filter_users(const Dataset& dataset, std::size_t min_records) {
    Dataset out;
    out.name = dataset.name;
    for (const auto& u : dataset.users) {
        if (u.visits.size() >= min_records) out.users.push_back(u);
    }
    out.rebuild_vocabulary();
    return out;
}

std::string rejects_to_jsonl(const std::vector<RejectedRow>& rejects) {
    std::vector<Json> rows;
    rows.reserve(rejects.size());
    for (const auto& r : rejects) {
        rows.push_back({{"line_no", r.line_no}, {"raw_line", to_valid_utf8(r.raw_line)}, {"reason", r.reason}});
    }
    return to_jsonl(rows);
}

std::string to_valid_utf8(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size());
    std::size_t i = 0;
    while (i < bytes.size()) {
        const auto len = utf8_sequence_length(bytes, i);
        if (len > 0) {
            out.append(bytes.substr(i, len));
            i += len;
        } else {
            const auto c = static_cast<unsigned char>(bytes[i]);
            out.push_back(static_cast<char>(0xC0 | (c >> 6)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
            ++i;
        }
    }
    return out;
}

}  // namespace nextloc
