// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>

#include "nextloc/error.hpp"
#include "nextloc/fileio.hpp"
#include "nextloc/ingest.hpp"
#include "nextloc/rng.hpp"
#include "synthetic.hpp"

using namespace nextloc;

namespace {

const char* kRow1 =
    "470\t49bbd6c0f964a520f4531fe3\t4bf58dd8d48988d127951735\tArts & Crafts Store\t40.719810375488535\t"
    "-74.00258103213994\t-240\tTue Apr 03 18:00:09 +0000 2012";
const char* kRow2 =
    "979\t4a43c0aef964a520c6a61fe3\t4bf58dd8d48988d1df941735\tBridge\t40.60679958140643\t-74.04416981025437\t"
    "-240\tTue Apr 03 18:00:25 +0000 2012";

}  // namespace

TEST_CASE("a dump row parses field by field") {
    CheckinRecord r;
    std::string why;
    REQUIRE(parse_checkin_row(kRow1, r, why));
    CHECK(r.user_id == "470");
    CHECK(r.venue_id == "49bbd6c0f964a520f4531fe3");
    CHECK(r.venue_category == "Arts & Crafts Store");
    CHECK(r.tz_offset_minutes == -240);
    CHECK(format_iso(r.utc_timestamp) == "2012-04-03T18:00:09");
    CHECK(format_iso(r.local_time()) == "2012-04-03T14:00:09");
    CHECK(r.raw_line == kRow1);
}

TEST_CASE("malformed rows are rejected with a reason") {
    CheckinRecord r;
    std::string why;
    CHECK_FALSE(parse_checkin_row("", r, why));
    CHECK_FALSE(parse_checkin_row("a\tb\tc", r, why));
    CHECK(why.find("8") != std::string::npos);
    std::string bad_lat = kRow1;
    bad_lat.replace(bad_lat.find("40.719810375488535"), 18, "91.0");
    CHECK_FALSE(parse_checkin_row(bad_lat, r, why));
    CHECK(why == "invalid latitude");
    std::string bad_ts = kRow1;
    bad_ts.replace(bad_ts.find("Tue Apr"), 3, "Xyz");
    CHECK_FALSE(parse_checkin_row(bad_ts, r, why));
    CHECK(why == "invalid timestamp");
}

TEST_CASE("rejects are collected, good rows survive, CRLF tolerated") {
    const std::string text = std::string(kRow1) + "\r\nbroken line\n" + kRow2 + "\n";
    const auto res = parse_checkin_text(text, "mini");
    CHECK(res.rows_in_file == 3);
    CHECK(res.records.size() == 2);
    REQUIRE(res.rejects.size() == 1);
    CHECK(res.rejects[0].line_no == 2);
    CHECK(res.rejects[0].raw_line == "broken line");
    CHECK(res.dataset.users.size() == 2);
    CHECK(res.dataset.vocabulary.size() == 2);
    const auto jsonl = rejects_to_jsonl(res.rejects);
    CHECK(Json::parse(jsonl.substr(0, jsonl.find('\n')))["line_no"] == 2);
}

TEST_CASE("a file with no usable row is fatal") {
    CHECK_THROWS_AS(parse_checkin_text("", "x"), DataError);
    CHECK_THROWS_AS(parse_checkin_text("junk\nmore junk\n", "x"), DataError);
    testsupport::TempDir dir("ingest");
    write_file_atomic(dir / "empty.txt", "");
    CHECK_THROWS_AS(parse_checkin_file(dir / "empty.txt"), DataError);
    CHECK_THROWS_AS(parse_checkin_file(dir / "absent.txt"), DataError);
}

TEST_CASE("dataset build is independent of row order and sorts by local time") {
    const auto text = testsupport::synthetic_checkins({.users = 6, .trips_per_user = 3});
    auto a = parse_checkin_text(text, "syn");
    auto records = a.records;
    SeededRng rng(11);
    rng.shuffle(records);
    const auto b = build_dataset("syn", records);
    REQUIRE(a.dataset.users.size() == b.users.size());
    for (std::size_t i = 0; i < b.users.size(); ++i) {
        CHECK(a.dataset.users[i].visits == b.users[i].visits);
        const auto& v = b.users[i].visits;
        CHECK(std::is_sorted(v.begin(), v.end(),
                             [](const Visit& x, const Visit& y) { return x.local_time < y.local_time; }));
    }
    CHECK(a.dataset.vocabulary == b.vocabulary);
}

TEST_CASE("user filter keeps users at or above the threshold") {
    const auto text = testsupport::synthetic_checkins({.users = 5, .trips_per_user = 3, .sparse_users = 2});
    const auto ds = parse_checkin_text(text, "syn").dataset;
    CHECK(ds.users.size() == 7);
    const auto kept = filter_users(ds, 10);
    CHECK(kept.users.size() == 5);
    for (const auto& u : kept.users) CHECK(u.visits.size() >= 10);
    CHECK(filter_users(ds, 5).users.size() == 7);
    CHECK(kept.vocabulary.size() < ds.vocabulary.size());
}

TEST_CASE("invalid utf-8 is reinterpreted as latin-1") {
    CHECK(to_valid_utf8("caf\xe9") == "caf\xc3\xa9");
    CHECK(to_valid_utf8("caf\xc3\xa9") == "caf\xc3\xa9");
    CHECK(to_valid_utf8("plain") == "plain");
}

TEST_CASE("visit labels") {
    const auto v = testsupport::label_visit("6 PM", "Sunday", "x");
    CHECK(v.hour_label == "6 PM");
    CHECK(v.day_of_week == "Sunday");
    CHECK(testsupport::label_visit("12:09 AM", "Wednesday", "y").hour_label == "0 AM");
}
