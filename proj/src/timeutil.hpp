#pragma once

#include <cstdint>
#include <string>

namespace ixrisk {

// Timezone-naive local timestamp, seconds at 1-second resolution.
// All matching rules (time of day, day of week) are local-clock concepts,
// so no UTC conversion ever happens.
using Timestamp = std::int64_t;

constexpr std::int64_t k_seconds_per_day = 86'400;
constexpr std::int64_t k_seconds_per_week = 7 * k_seconds_per_day;

struct CivilTime {
    int year = 1970;
    int month = 1; // 1..12
    int day = 1;   // 1..31
    int hour = 0;
    int minute = 0;
    int second = 0;
};

// Days since 1970-01-01 for a proleptic Gregorian civil date.
std::int64_t days_from_civil(int year, int month, int day);
CivilTime civil_from_timestamp(Timestamp ts);

Timestamp make_timestamp(const CivilTime& c);
Timestamp make_timestamp(int year, int month, int day, int hour = 0, int minute = 0,
                         int second = 0);

// 0 = Monday .. 6 = Sunday.
int weekday(Timestamp ts);
// Seconds since local midnight, in [0, 86400).
std::int64_t clock_of_day(Timestamp ts);
// Local midnight of the timestamp's date.
Timestamp date_of(Timestamp ts);

// "YYYY-MM-DD HH:MM:SS"; parse rejects anything else.
std::string format_timestamp(Timestamp ts);
Timestamp parse_timestamp(const std::string& text);

const char* weekday_name(int wd);

} // namespace ixrisk
