// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace nextloc {

using UtcTime = std::chrono::sys_seconds;
using LocalTime = std::chrono::local_seconds;

/// Parses the Foursquare dump timestamp layout, e.g. "Tue Apr 03 18:15:33 +0000 2012".
/// The weekday token must agree with the date.
std::optional<UtcTime> parse_checkin_timestamp(std::string_view text);

struct IsoTimestamp {
    UtcTime utc;
    LocalTime local;  // wall clock as written
};

/// Parses "YYYY-MM-DD[T ]HH:MM[:SS[.fff]][Z|±HH[:]MM]". Without an offset the
/// wall clock is taken as both local and UTC.
std::optional<IsoTimestamp> parse_iso8601(std::string_view text);

/// Compact hour label: "0 AM" .. "11 AM", "12 PM", "1 PM" .. "11 PM".
std::string hour_label(LocalTime t);

/// Minute-precision label as in strftime "%I:%M %p", e.g. "03:16 AM", "12:09 AM".
std::string minute_label(LocalTime t);

/// English day name, "Monday" .. "Sunday".
std::string day_name(LocalTime t);

/// "YYYY-MM-DDTHH:MM:SS"
std::string format_iso(LocalTime t);
std::string format_iso(UtcTime t);

/// Inverse of format_iso for wall-clock values (no offset accepted).
std::optional<LocalTime> parse_local_iso(std::string_view text);

bool is_day_name(std::string_view s);

}  // namespace nextloc
