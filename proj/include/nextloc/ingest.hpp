// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "nextloc/timefmt.hpp"

namespace nextloc {

/// One row of a Foursquare-style check-in dump.
struct CheckinRecord {
    std::string user_id;
    std::string venue_id;
    std::string venue_category_id;
    std::string venue_category;
    double latitude = 0.0;
    double longitude = 0.0;
    int tz_offset_minutes = 0;
    UtcTime utc_timestamp{};

    std::string raw_line;  // exactly as read, without the line terminator
    std::size_t line_no = 0;

    LocalTime local_time() const;
};

/// A spatio-temporal point as shown to a predictor.
struct Visit {
    LocalTime local_time{};
    std::string hour_label;   // "6 PM"
    std::string day_of_week;  // "Wednesday"
    std::string location_id;

    static Visit at(LocalTime t, std::string location_id);

    friend bool operator==(const Visit&, const Visit&) = default;
};

struct UserHistory {
    std::string user_id;
    std::vector<Visit> visits;  // non-decreasing local_time
};

struct Dataset {
    std::string name;
    std::vector<UserHistory> users;     // ordered by user_id
    std::set<std::string> vocabulary;   // union of location ids across users

    void rebuild_vocabulary();
    std::size_t visit_count() const;
};

struct RejectedRow {
    std::size_t line_no = 0;
    std::string raw_line;
    std::string reason;
};

struct CheckinParseResult {
    Dataset dataset;
    std::vector<CheckinRecord> records;  // parsed rows in file order
    std::vector<RejectedRow> rejects;
    std::size_t rows_in_file = 0;
};

/// Parses one tab-separated row. On failure returns false and sets `reason`.
bool parse_checkin_row(std::string_view line, CheckinRecord& out, std::string& reason);

/// Parses an 8-field tab-separated dump held in memory. Malformed rows land in
/// `rejects`; throws DataError only when no row parses.
CheckinParseResult parse_checkin_text(std::string_view text, std::string name);

CheckinParseResult parse_checkin_file(const std::filesystem::path& path, std::string name = {});

/// Groups records per user and orders each user's visits by local time. The
/// result does not depend on the order of `records`.
Dataset build_dataset(std::string name, const std::vector<CheckinRecord>& records);

/// Keeps users with at least `min_records` visits and recomputes the vocabulary.
Dataset filter_users(const Dataset& dataset, std::size_t min_records = 10);

/// JSON-lines rendering of a rejects report: {line_no, raw_line, reason}.
std::string rejects_to_jsonl(const std::vector<RejectedRow>& rejects);

/// Bytes that are not valid UTF-8 are reinterpreted as Latin-1. Used before
/// anything is serialised to JSON or shown to a model.
std::string to_valid_utf8(std::string_view bytes);

}  // namespace nextloc
