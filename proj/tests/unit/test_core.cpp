// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <map>
#include <set>

#include "nextloc/error.hpp"
#include "nextloc/fileio.hpp"
#include "nextloc/hash.hpp"
#include "nextloc/rng.hpp"
#include "nextloc/timefmt.hpp"
#include "synthetic.hpp"

using namespace nextloc;
using namespace std::chrono;

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(short_hash("abc") == "ba7816bf8f01cfea");
}

TEST_CASE("sha256_file matches in-memory digest") {
    testsupport::TempDir dir("core");
    const std::string body(100000, 'x');
    write_file_atomic(dir / "f.bin", body);
    CHECK(sha256_file((dir / "f.bin").string()) == sha256_hex(body));
    CHECK_THROWS_AS(sha256_file((dir / "missing").string()), DataError);
}

TEST_CASE("seeded rng is reproducible and labels are independent") {
    auto a = SeededRng::derived(42, "alpha");
    auto b = SeededRng::derived(42, "alpha");
    auto c = SeededRng::derived(42, "beta");
    bool differs = false;
    for (int i = 0; i < 32; ++i) {
        const auto x = a.next();
        CHECK(x == b.next());
        differs = differs || x != c.next();
    }
    CHECK(differs);
}

TEST_CASE("below stays in range and covers it") {
    SeededRng rng(1);
    std::map<std::uint64_t, int> counts;
    for (int i = 0; i < 7000; ++i) {
        const auto v = rng.below(7);
        REQUIRE(v < 7);
        ++counts[v];
    }
    CHECK(counts.size() == 7);
    for (auto [v, n] : counts) CHECK(n > 800);
}

TEST_CASE("sample_indices returns sorted distinct indices") {
    SeededRng rng(9);
    for (std::size_t n : {0u, 1u, 5u, 50u}) {
        for (std::size_t k : {0u, 1u, 3u, 80u}) {
            const auto idx = rng.sample_indices(n, k);
            CHECK(idx.size() == std::min(n, k));
            CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == idx.size());
            CHECK(std::is_sorted(idx.begin(), idx.end()));
            for (auto i : idx) CHECK(i < n);
        }
    }
}

TEST_CASE("shuffle is a permutation") {
    SeededRng rng(5);
    std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
    auto w = v;
    rng.shuffle(w);
    std::sort(w.begin(), w.end());
    CHECK(w == v);
}

TEST_CASE("check-in timestamps") {
    const auto t = parse_checkin_timestamp("Tue Apr 03 18:15:33 +0000 2012");
    REQUIRE(t);
    CHECK(format_iso(*t) == "2012-04-03T18:15:33");
    CHECK_FALSE(parse_checkin_timestamp("Wed Apr 03 18:15:33 +0000 2012"));  // weekday disagrees
    CHECK_FALSE(parse_checkin_timestamp("Tue Apr 31 18:15:33 +0000 2012"));
    CHECK_FALSE(parse_checkin_timestamp("garbage"));
}

TEST_CASE("iso timestamps with and without offsets") {
    auto a = parse_iso8601("2012-04-03T08:00:00Z");
    REQUIRE(a);
    CHECK(format_iso(a->utc) == "2012-04-03T08:00:00");
    auto b = parse_iso8601("2012-04-03 08:00:00-04:00");
    REQUIRE(b);
    CHECK(format_iso(b->utc) == "2012-04-03T12:00:00");
    CHECK(format_iso(b->local) == "2012-04-03T08:00:00");
    auto c = parse_iso8601("2012-04-03T08:00");
    REQUIRE(c);
    CHECK(format_iso(c->local) == "2012-04-03T08:00:00");
    CHECK_FALSE(parse_iso8601("2012-13-03T08:00:00"));
}

TEST_CASE("hour and minute labels") {
    const local_days d{year{2012} / April / 1};
    CHECK(hour_label(LocalTime{d}) == "0 AM");
    CHECK(hour_label(LocalTime{d + hours{11} + minutes{59}}) == "11 AM");
    CHECK(hour_label(LocalTime{d + hours{12}}) == "12 PM");
    CHECK(hour_label(LocalTime{d + hours{18}}) == "6 PM");
    CHECK(minute_label(LocalTime{d + minutes{9}}) == "12:09 AM");
    CHECK(minute_label(LocalTime{d + hours{15} + minutes{16}}) == "03:16 PM");
    CHECK(day_name(LocalTime{d}) == "Sunday");
    CHECK(day_name(LocalTime{d + days{3}}) == "Wednesday");
    CHECK(is_day_name("Friday"));
    CHECK_FALSE(is_day_name("friday"));
}

TEST_CASE("local iso round trip") {
    const LocalTime t{local_days{year{2013} / February / 28} + hours{23} + minutes{5} + seconds{7}};
    const auto back = parse_local_iso(format_iso(t));
    REQUIRE(back);
    CHECK(*back == t);
}

TEST_CASE("jsonl read and write") {
    testsupport::TempDir dir("core");
    std::vector<Json> recs{{{"b", 1}, {"a", "x"}}, {{"k", {1, 2}}}};
    write_file_atomic(dir / "r.jsonl", to_jsonl(recs) + "\n");
    const auto back = read_jsonl(dir / "r.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back[0] == recs[0]);
    append_line(dir / "r.jsonl", "not json");
    CHECK_THROWS_AS(read_jsonl(dir / "r.jsonl"), DataError);
    CHECK_THROWS_AS(read_file(dir / "nope"), DataError);
}
