#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace authpeer::timeutil {

// Seconds-precision UTC instants as Unix epoch seconds.

// Parses "YYYY-MM-DDTHH:MM:SS[.fff](Z|+00:00)". Fractional seconds are
// truncated. Returns nullopt on anything malformed or non-UTC.
std::optional<int64_t> parse_iso8601_utc(const std::string& text);

std::string format_iso8601_utc(int64_t epoch_sec);

int64_t hour_bucket(int64_t epoch_sec);          // floor to hour start
int64_t day_start(int64_t epoch_sec);            // floor to midnight UTC
int hour_of_day(int64_t epoch_sec);              // 0..23
int day_of_week_sunday1(int64_t epoch_sec);      // 1 = Sunday .. 7 = Saturday

int64_t days_from_civil(int year, int month, int day);
void civil_from_days(int64_t days, int* year, int* month, int* day);

}  // namespace authpeer::timeutil
