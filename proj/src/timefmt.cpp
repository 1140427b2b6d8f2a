// SPDX-License-Identifier: Apache-2.0
#include "nextloc/timefmt.hpp"

#include <array>
#include <charconv>
#include <cstdio>

namespace nextloc {
namespace {

using namespace std::chrono;

constexpr std::array<std::string_view, 7> kDayNames = {"Sunday", "Monday", "Tuesday", "Wednesday",
                                                       "Thursday", "Friday", "Saturday"};
constexpr std::array<std::string_view, 7> kDayAbbrev = {"Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"};
constexpr std::array<std::string_view, 12> kMonthAbbrev = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                           "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

bool parse_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

std::optional<sys_days> make_date(int y, int m, int d) {
    year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return sys_days{ymd};
}

std::optional<seconds> make_clock(int hh, int mm, int ss) {
    if (hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 60) return std::nullopt;
    return hours{hh} + minutes{mm} + seconds{ss};
}

struct Fields {
    int hour;
    int minute;
    unsigned weekday;  // 0 = Sunday
};

Fields split(LocalTime t) {
    const auto day_start = floor<days>(t);
    const auto tod = hh_mm_ss<seconds>{t - day_start};
    const weekday wd{sys_days{day_start.time_since_epoch()}};
    return {static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()), wd.c_encoding()};
}

}  // namespace

std::optional<UtcTime> parse_checkin_timestamp(std::string_view text) {
    // Www Mmm DD HH:MM:SS +hhmm YYYY
    if (text.size() != 30) return std::nullopt;
    const auto wd = text.substr(0, 3);
    const auto mon = text.substr(4, 3);
    if (text[3] != ' ' || text[7] != ' ' || text[10] != ' ' || text[19] != ' ' || text[25] != ' ') return std::nullopt;
    if (text[13] != ':' || text[16] != ':') return std::nullopt;
    int month_index = -1;
    for (std::size_t i = 0; i < kMonthAbbrev.size(); ++i) {
        if (kMonthAbbrev[i] == mon) month_index = static_cast<int>(i) + 1;
    }
    if (month_index < 0) return std::nullopt;
    int d = 0, hh = 0, mm = 0, ss = 0, y = 0, off_h = 0, off_m = 0;
    if (!parse_int(text.substr(8, 2), d) || !parse_int(text.substr(11, 2), hh) || !parse_int(text.substr(14, 2), mm) ||
        !parse_int(text.substr(17, 2), ss) || !parse_int(text.substr(26, 4), y)) {
        return std::nullopt;
    }
    const char sign = text[20];
    if ((sign != '+' && sign != '-') || !parse_int(text.substr(21, 2), off_h) || !parse_int(text.substr(23, 2), off_m)) {
        return std::nullopt;
    }
    const auto date = make_date(y, month_index, d);
    const auto clock = make_clock(hh, mm, ss);
    if (!date || !clock) return std::nullopt;
    if (kDayAbbrev[weekday{*date}.c_encoding()] != wd) return std::nullopt;
    const seconds offset = hours{off_h} + minutes{off_m};
    UtcTime t = *date + *clock;
    return sign == '+' ? t - offset : t + offset;
}

std::optional<IsoTimestamp> parse_iso8601(std::string_view text) {
    if (text.size() < 16) return std::nullopt;
    int y = 0, mo = 0, d = 0, hh = 0, mm = 0, ss = 0;
    if (text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') || text[13] != ':') return std::nullopt;
    if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), mo) || !parse_int(text.substr(8, 2), d) ||
        !parse_int(text.substr(11, 2), hh) || !parse_int(text.substr(14, 2), mm)) {
        return std::nullopt;
    }
    std::size_t pos = 16;
    if (pos < text.size() && text[pos] == ':') {
        if (pos + 3 > text.size() || !parse_int(text.substr(pos + 1, 2), ss)) return std::nullopt;
        pos += 3;
        if (pos < text.size() && text[pos] == '.') {
            ++pos;
            while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
        }
    }
    seconds offset{0};
    if (pos < text.size()) {
        const auto rest = text.substr(pos);
        if (rest == "Z") {
        } else if (rest[0] == '+' || rest[0] == '-') {
            int oh = 0, om = 0;
            std::string_view digits = rest.substr(1);
            if (digits.size() == 5 && digits[2] == ':') {
                if (!parse_int(digits.substr(0, 2), oh) || !parse_int(digits.substr(3, 2), om)) return std::nullopt;
            } else if (digits.size() == 4) {
                if (!parse_int(digits.substr(0, 2), oh) || !parse_int(digits.substr(2, 2), om)) return std::nullopt;
            } else if (digits.size() == 2) {
                if (!parse_int(digits, oh)) return std::nullopt;
            } else {
                return std::nullopt;
            }
            offset = hours{oh} + minutes{om};
            if (rest[0] == '-') offset = -offset;
        } else {
            return std::nullopt;
        }
    }
    const auto date = make_date(y, mo, d);
    const auto clock = make_clock(hh, mm, ss);
    if (!date || !clock) return std::nullopt;
    const LocalTime local{(*date + *clock).time_since_epoch()};
    return IsoTimestamp{UtcTime{local.time_since_epoch() - offset}, local};
}

std::string hour_label(LocalTime t) {
    const auto f = split(t);
    if (f.hour < 12) return std::to_string(f.hour) + " AM";
    const int h = f.hour == 12 ? 12 : f.hour - 12;
    return std::to_string(h) + " PM";
}

std::string minute_label(LocalTime t) {
    const auto f = split(t);
    int h12 = f.hour % 12;
    if (h12 == 0) h12 = 12;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d:%02d %s", h12, f.minute, f.hour < 12 ? "AM" : "PM");
    return buf;
}

std::string day_name(LocalTime t) { return std::string(kDayNames[split(t).weekday]); }

std::string format_iso(LocalTime t) { return format_iso(UtcTime{t.time_since_epoch()}); }

std::string format_iso(UtcTime t) {
    const auto day_start = floor<days>(t);
    const year_month_day ymd{day_start};
    const hh_mm_ss<seconds> tod{t - day_start};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                  static_cast<int>(tod.seconds().count()));
    return buf;
}

std::optional<LocalTime> parse_local_iso(std::string_view text) {
    const auto parsed = parse_iso8601(text);
    if (!parsed || parsed->utc.time_since_epoch() != parsed->local.time_since_epoch()) return std::nullopt;
    return parsed->local;
}

bool is_day_name(std::string_view s) {
    for (auto d : kDayNames) {
        if (d == s) return true;
    }
    return false;
}

}  // namespace nextloc
