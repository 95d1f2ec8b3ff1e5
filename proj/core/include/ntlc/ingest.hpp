#pragma once

#include <optional>
#include <vector>

#include "ntlc/series.hpp"

namespace ntlc {

/// Area-weighted mean radiance over one day's pixel records for a zone.
///
/// Weights are the fixed WGS84 pixel areas from the zone definition. Records
/// flagged missing are excluded; when every record is missing (or the list is
/// empty) the day is a gap and nullopt is returned. Records must all carry
/// the same date and belong to the zone.
std::optional<double> aggregate_zone(const std::vector<PixelRecord>& day_records,
                                     const UrbanZone& zone);

/// Trailing (causal) rolling mean over `window` calendar days.
///
/// Output day t averages the unmasked values in [t-window+1, t]; the window
/// is shorter near the series head. Masked days are excluded from every mean
/// and stay masked in the output; an unmasked day whose window holds no
/// unmasked value would be masked too (cannot happen since the window always
/// contains the day itself). window must be >= 1.
NtlSeries rolling_smooth(const NtlSeries& series, int window);

/// Derives the zone footprint from pixel records: one entry per distinct
/// pixel_id with its WGS84 cell area. Re-occurring pixels must repeat the
/// same geometry; conflicting geometry raises ValidationError.
UrbanZone zone_from_records(const std::vector<PixelRecord>& records,
                            const std::string& zone_id);

/// Full aggregation pipeline: groups records by day, area-weights each day,
/// marks days with no valid observation (including calendar days absent from
/// the input) as gaps, and returns the contiguous daily series.
NtlSeries build_zone_series(const std::vector<PixelRecord>& records,
                            const UrbanZone& zone);

}  // namespace ntlc
