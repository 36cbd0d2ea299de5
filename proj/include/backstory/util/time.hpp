#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <string>
#include <string_view>

#include "backstory/error.hpp"

namespace backstory::util {

using UtcSeconds = std::chrono::sys_seconds;

// "YYYY-MM-DDTHH:MM:SSZ"
inline std::string format_utc(UtcSeconds t) {
  const std::time_t tt = t.time_since_epoch().count();
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec);
  return buf;
}

inline UtcSeconds parse_utc(std::string_view text) {
  int y, mo, d, h, mi, s;
  char z = 0;
  const std::string str(text);
  if (std::sscanf(str.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y, &mo, &d, &h,
                  &mi, &s, &z) != 7 ||
      z != 'Z' || str.size() != 20) {
    throw ValidationError("timestamp", "expected YYYY-MM-DDTHH:MM:SSZ, got '" +
                                           str + "'");
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) {
    throw ValidationError("timestamp", "out of range: '" + str + "'");
  }
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

inline UtcSeconds now_utc() {
  return std::chrono::floor<std::chrono::seconds>(
      std::chrono::system_clock::now());
}

}  // namespace backstory::util
