#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ntlc/date.hpp"

namespace ntlc {

enum class QualityFlag { good, gapfilled, missing };

QualityFlag quality_from_string(const std::string& token);
std::string to_string(QualityFlag q);

/// One satellite pixel observation for one day.
struct PixelRecord {
  Date date;
  std::string pixel_id;
  double radiance = 0.0;        // nW cm^-2 sr^-1, >= 0 unless missing
  double latitude_deg = 0.0;    // cell center, [-90, 90]
  double height_deg = 0.0;      // cell extent, > 0
  double width_deg = 0.0;       // cell extent, > 0
  QualityFlag quality = QualityFlag::good;
};

/// Validates the record invariants; throws ValidationError on violation.
void validate(const PixelRecord& rec);

/// Spatial footprint of a monitored zone: the pixels it aggregates and the
/// fixed area weight of each.
struct UrbanZone {
  std::string zone_id;
  std::vector<std::string> pixel_ids;
  std::vector<double> pixel_areas_km2;  // parallel to pixel_ids, all > 0
};

/// Daily radiance series for one zone. A day is either an observation
/// (gap_mask false) or a gap (gap_mask true, value meaningless).
struct NtlSeries {
  std::string zone_id;
  Date start_date;
  std::vector<double> values;
  std::vector<bool> gap_mask;  // parallel to values

  std::size_t size() const { return values.size(); }
  Date date_at(std::size_t i) const { return start_date + static_cast<std::int64_t>(i); }

  /// Index of the given date, or npos when outside the covered range.
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t index_of(const Date& d) const {
    const std::int64_t off = d - start_date;
    if (off < 0 || off >= static_cast<std::int64_t>(values.size())) return npos;
    return static_cast<std::size_t>(off);
  }
};

/// Checks the series invariants (parallel arrays, unmasked values finite and
/// >= 0). Throws ValidationError on violation.
void validate(const NtlSeries& series);

}  // namespace ntlc
