#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ntlc/series.hpp"

namespace ntlc {

/// Writes content to path via a temp file in the same directory followed by
/// an atomic rename, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

/// Splits one CSV line on commas. No quoting support; the formats used here
/// never contain embedded commas.
std::vector<std::string> split_csv_line(const std::string& line);

/// Strict double parser; throws ParseError naming the context on failure.
double parse_double(const std::string& token, const std::string& context);

/// Reads the pixel observation schema:
///   date,pixel_id,radiance,latitude,pixel_height_deg,pixel_width_deg,quality
/// Every record is validated; errors carry the 1-based line number.
std::vector<PixelRecord> read_pixel_csv(const std::filesystem::path& path);

void write_pixel_csv(const std::vector<PixelRecord>& records,
                     const std::filesystem::path& path);

/// Reads the zone series schema: date,radiance,gap with gap in {0,1}.
/// Rows must form consecutive calendar days. Gap rows may leave radiance
/// empty. zone_id is attached from the caller since the schema has no id.
NtlSeries read_zone_csv(const std::filesystem::path& path, const std::string& zone_id);

void write_zone_csv(const NtlSeries& series, const std::filesystem::path& path);

}  // namespace ntlc
