#include "ntlc/date.hpp"

#include <array>
#include <cstdio>

#include "ntlc/errors.hpp"

namespace ntlc {
namespace {

// Civil-from-days and days-from-civil, Hinnant's algorithms; exact for the
// proleptic Gregorian calendar over the full int range used here.
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::array<int, 3> civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return {static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

bool is_leap(int y) {
  return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

int days_in_month(int y, int m) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap(y)) return 29;
  return kDays[m - 1];
}

}  // namespace

Date::Date(int year, int month, int day) {
  if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month)) {
    throw ParseError("invalid calendar date: " + std::to_string(year) + "-" +
                     std::to_string(month) + "-" + std::to_string(day));
  }
  serial_ = days_from_civil(year, month, day);
}

Date Date::parse(const std::string& text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw ParseError("expected YYYY-MM-DD date, got '" + text + "'");
  }
  for (size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
    if (text[i] < '0' || text[i] > '9') {
      throw ParseError("expected YYYY-MM-DD date, got '" + text + "'");
    }
  }
  const int y = std::stoi(text.substr(0, 4));
  const int m = std::stoi(text.substr(5, 2));
  const int d = std::stoi(text.substr(8, 2));
  return Date(y, m, d);
}

Date Date::from_serial(std::int64_t days_since_epoch) {
  Date out;
  out.serial_ = days_since_epoch;
  return out;
}

int Date::year() const { return civil_from_days(serial_)[0]; }
int Date::month() const { return civil_from_days(serial_)[1]; }
int Date::day() const { return civil_from_days(serial_)[2]; }

std::string Date::to_string() const {
  const auto ymd = civil_from_days(serial_);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", ymd[0], ymd[1], ymd[2]);
  return buf;
}

}  // namespace ntlc
