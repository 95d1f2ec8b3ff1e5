#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace ntlc {

/// Proleptic Gregorian calendar date with day-resolution arithmetic.
/// Internally a count of days since 1970-01-01 so that adding N days to a
/// date is exact integer arithmetic.
class Date {
 public:
  Date() = default;
  Date(int year, int month, int day);

  /// Parses strict ISO-8601 "YYYY-MM-DD". Throws ParseError otherwise.
  static Date parse(const std::string& text);
  static Date from_serial(std::int64_t days_since_epoch);

  std::int64_t serial() const { return serial_; }
  int year() const;
  int month() const;
  int day() const;

  std::string to_string() const;

  Date operator+(std::int64_t days) const { return from_serial(serial_ + days); }
  Date operator-(std::int64_t days) const { return from_serial(serial_ - days); }
  std::int64_t operator-(const Date& other) const { return serial_ - other.serial_; }
  Date& operator++() { ++serial_; return *this; }

  auto operator<=>(const Date&) const = default;

 private:
  std::int64_t serial_ = 0;
};

}  // namespace ntlc
