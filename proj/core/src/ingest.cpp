#include "ntlc/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "ntlc/errors.hpp"
#include "ntlc/geo.hpp"

namespace ntlc {

std::optional<double> aggregate_zone(const std::vector<PixelRecord>& day_records,
                                     const UrbanZone& zone) {
  if (zone.pixel_ids.size() != zone.pixel_areas_km2.size()) {
    throw ValidationError("zone pixel ids and areas differ in length");
  }
  std::unordered_map<std::string, double> area_of;
  area_of.reserve(zone.pixel_ids.size());
  for (std::size_t i = 0; i < zone.pixel_ids.size(); ++i) {
    if (!(zone.pixel_areas_km2[i] > 0.0)) {
      throw ValidationError("zone pixel area must be > 0 for " + zone.pixel_ids[i]);
    }
    area_of[zone.pixel_ids[i]] = zone.pixel_areas_km2[i];
  }

  double weight_sum = 0.0;
  double weighted = 0.0;
  std::optional<Date> day;
  for (const auto& rec : day_records) {
    validate(rec);
    if (day && rec.date != *day) {
      throw ValidationError("aggregate_zone fed records from multiple dates");
    }
    day = rec.date;
    const auto it = area_of.find(rec.pixel_id);
    if (it == area_of.end()) {
      throw ValidationError("pixel " + rec.pixel_id + " not part of zone " + zone.zone_id);
    }
    if (rec.quality == QualityFlag::missing) continue;
    weighted += it->second * rec.radiance;
    weight_sum += it->second;
  }
  if (weight_sum == 0.0) return std::nullopt;
  return weighted / weight_sum;
}

NtlSeries rolling_smooth(const NtlSeries& series, int window) {
  if (window < 1) throw DomainError("rolling window must be >= 1");
  validate(series);

  NtlSeries out;
  out.zone_id = series.zone_id;
  out.start_date = series.start_date;
  const std::size_t n = series.size();
  out.values.assign(n, 0.0);
  out.gap_mask.assign(n, true);

  // Running sums over the trailing window; masked days contribute nothing.
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (!series.gap_mask[t]) {
      sum += series.values[t];
      ++count;
    }
    if (t >= static_cast<std::size_t>(window)) {
      const std::size_t drop = t - window;
      if (!series.gap_mask[drop]) {
        sum -= series.values[drop];
        --count;
      }
    }
    if (!series.gap_mask[t] && count > 0) {
      out.values[t] = sum / static_cast<double>(count);
      out.gap_mask[t] = false;
    }
  }
  return out;
}

UrbanZone zone_from_records(const std::vector<PixelRecord>& records,
                            const std::string& zone_id) {
  struct Geometry {
    double lat, h, w;
  };
  UrbanZone zone;
  zone.zone_id = zone_id;
  std::unordered_map<std::string, Geometry> seen;
  for (const auto& rec : records) {
    validate(rec);
    const auto it = seen.find(rec.pixel_id);
    if (it == seen.end()) {
      seen.emplace(rec.pixel_id, Geometry{rec.latitude_deg, rec.height_deg, rec.width_deg});
      zone.pixel_ids.push_back(rec.pixel_id);
      zone.pixel_areas_km2.push_back(
          pixel_area_wgs84(rec.latitude_deg, rec.height_deg, rec.width_deg));
    } else {
      const auto& g = it->second;
      if (g.lat != rec.latitude_deg || g.h != rec.height_deg || g.w != rec.width_deg) {
        throw ValidationError("pixel " + rec.pixel_id + " repeats with different geometry");
      }
    }
  }
  if (zone.pixel_ids.empty()) throw InsufficientDataError("no pixel records for zone " + zone_id);
  return zone;
}

NtlSeries build_zone_series(const std::vector<PixelRecord>& records,
                            const UrbanZone& zone) {
  if (records.empty()) throw InsufficientDataError("no pixel records to aggregate");

  std::map<std::int64_t, std::vector<PixelRecord>> by_day;
  for (const auto& rec : records) by_day[rec.date.serial()].push_back(rec);

  const Date first = Date::from_serial(by_day.begin()->first);
  const Date last = Date::from_serial(by_day.rbegin()->first);

  NtlSeries series;
  series.zone_id = zone.zone_id;
  series.start_date = first;
  const std::size_t n = static_cast<std::size_t>(last - first) + 1;
  series.values.assign(n, 0.0);
  series.gap_mask.assign(n, true);

  for (const auto& [serial, recs] : by_day) {
    const auto value = aggregate_zone(recs, zone);
    const std::size_t idx = static_cast<std::size_t>(serial - first.serial());
    if (value) {
      series.values[idx] = *value;
      series.gap_mask[idx] = false;
    }
  }
  return series;
}

}  // namespace ntlc
