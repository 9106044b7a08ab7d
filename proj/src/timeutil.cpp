#include "timeutil.hpp"

#include "errors.hpp"

#include <array>
#include <cstdio>
#include <cstring>

namespace ixrisk {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b) != 0 && ((a < 0) != (b < 0))) --q;
    return q;
}

std::int64_t floor_mod(std::int64_t a, std::int64_t b) { return a - floor_div(a, b) * b; }

} // namespace

std::int64_t days_from_civil(int y, int m, int d) {
    // Howard Hinnant's algorithm, proleptic Gregorian.
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilTime civil_from_timestamp(Timestamp ts) {
    const std::int64_t z = floor_div(ts, k_seconds_per_day) + 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;

    CivilTime c;
    c.year = static_cast<int>(y + (m <= 2));
    c.month = static_cast<int>(m);
    c.day = static_cast<int>(d);
    const std::int64_t sod = floor_mod(ts, k_seconds_per_day);
    c.hour = static_cast<int>(sod / 3600);
    c.minute = static_cast<int>((sod % 3600) / 60);
    c.second = static_cast<int>(sod % 60);
    return c;
}

Timestamp make_timestamp(const CivilTime& c) {
    return make_timestamp(c.year, c.month, c.day, c.hour, c.minute, c.second);
}

Timestamp make_timestamp(int year, int month, int day, int hour, int minute, int second) {
    return days_from_civil(year, month, day) * k_seconds_per_day + hour * 3600 + minute * 60 +
           second;
}

int weekday(Timestamp ts) {
    // 1970-01-01 was a Thursday (weekday 3 with Monday = 0).
    return static_cast<int>(floor_mod(floor_div(ts, k_seconds_per_day) + 3, 7));
}

std::int64_t clock_of_day(Timestamp ts) { return floor_mod(ts, k_seconds_per_day); }

Timestamp date_of(Timestamp ts) { return ts - clock_of_day(ts); }

std::string format_timestamp(Timestamp ts) {
    const CivilTime c = civil_from_timestamp(ts);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:%02d", c.year, c.month, c.day,
                  c.hour, c.minute, c.second);
    return buf;
}

Timestamp parse_timestamp(const std::string& text) {
    CivilTime c;
    char trailing = 0;
    const int n = std::sscanf(text.c_str(), "%d-%d-%d %d:%d:%d%c", &c.year, &c.month, &c.day,
                              &c.hour, &c.minute, &c.second, &trailing);
    if (n != 6 || c.month < 1 || c.month > 12 || c.day < 1 || c.day > 31 || c.hour < 0 ||
        c.hour > 23 || c.minute < 0 || c.minute > 59 || c.second < 0 || c.second > 59) {
        throw_invalid("bad timestamp '" + text + "' (expected YYYY-MM-DD HH:MM:SS)");
    }
    return make_timestamp(c);
}

const char* weekday_name(int wd) {
    static constexpr std::array<const char*, 7> names = {"Mon", "Tue", "Wed", "Thu",
                                                         "Fri", "Sat", "Sun"};
    return (wd >= 0 && wd < 7) ? names[static_cast<std::size_t>(wd)] : "?";
}

} // namespace ixrisk
