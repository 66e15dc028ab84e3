#include "authpeer/timeutil.hpp"

#include <cctype>
#include <cstdio>

namespace authpeer::timeutil {

namespace {

bool read_digits(const std::string& s, size_t pos, int n, int* out) {
  int v = 0;
  for (int i = 0; i < n; ++i) {
    if (pos + i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos + i]))) return false;
    v = v * 10 + (s[pos + i] - '0');
  }
  *out = v;
  return true;
}

bool valid_date(int y, int m, int d) {
  static const int mdays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m < 1 || m > 12 || d < 1) return false;
  int dim = mdays[m - 1];
  bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  if (m == 2 && leap) dim = 29;
  return d <= dim;
}

constexpr int64_t kSecPerDay = 86400;

int64_t floor_div(int64_t a, int64_t b) {
  int64_t q = a / b;
  return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

}  // namespace

// Howard Hinnant's civil-date algorithms (public domain).
int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

void civil_from_days(int64_t z, int* year, int* month, int* day) {
  z += 719468;
  const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int64_t y = static_cast<int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  *year = static_cast<int>(y + (m <= 2));
  *month = static_cast<int>(m);
  *day = static_cast<int>(d);
}

std::optional<int64_t> parse_iso8601_utc(const std::string& s) {
  int y, mo, d, h, mi, se;
  if (!read_digits(s, 0, 4, &y)) return std::nullopt;
  if (s.size() < 20 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':')
    return std::nullopt;
  if (!read_digits(s, 5, 2, &mo) || !read_digits(s, 8, 2, &d) || !read_digits(s, 11, 2, &h) ||
      !read_digits(s, 14, 2, &mi) || !read_digits(s, 17, 2, &se))
    return std::nullopt;
  if (!valid_date(y, mo, d) || h > 23 || mi > 59 || se > 60) return std::nullopt;
  size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    size_t start = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == start) return std::nullopt;
  }
  if (pos >= s.size()) return std::nullopt;
  std::string tz = s.substr(pos);
  if (tz != "Z" && tz != "+00:00" && tz != "+0000") return std::nullopt;
  if (se == 60) se = 59;  // leap seconds clamped
  return days_from_civil(y, mo, d) * kSecPerDay + h * 3600 + mi * 60 + se;
}

std::string format_iso8601_utc(int64_t t) {
  int64_t days = floor_div(t, kSecPerDay);
  int64_t rem = t - days * kSecPerDay;
  int y, m, d;
  civil_from_days(days, &y, &m, &d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                static_cast<int>(rem / 3600), static_cast<int>((rem / 60) % 60),
                static_cast<int>(rem % 60));
  return buf;
}

int64_t hour_bucket(int64_t t) { return floor_div(t, 3600) * 3600; }
int64_t day_start(int64_t t) { return floor_div(t, kSecPerDay) * kSecPerDay; }
int hour_of_day(int64_t t) { return static_cast<int>((t - day_start(t)) / 3600); }

int day_of_week_sunday1(int64_t t) {
  // 1970-01-01 is a Thursday.
  int64_t days = floor_div(t, kSecPerDay);
  int64_t dow0 = ((days + 4) % 7 + 7) % 7;  // 0 = Sunday
  return static_cast<int>(dow0) + 1;
}

}  // namespace authpeer::timeutil
