#include "ntlc/csvio.hpp"

#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include "ntlc/errors.hpp"

namespace ntlc {

QualityFlag quality_from_string(const std::string& token) {
  if (token == "good") return QualityFlag::good;
  if (token == "gapfilled") return QualityFlag::gapfilled;
  if (token == "missing") return QualityFlag::missing;
  throw ParseError("unknown quality flag '" + token + "'");
}

std::string to_string(QualityFlag q) {
  switch (q) {
    case QualityFlag::good: return "good";
    case QualityFlag::gapfilled: return "gapfilled";
    case QualityFlag::missing: return "missing";
  }
  throw DomainError("invalid quality flag value");
}

void validate(const PixelRecord& rec) {
  if (rec.pixel_id.empty()) throw ValidationError("pixel_id must be non-empty");
  if (rec.latitude_deg < -90.0 || rec.latitude_deg > 90.0) {
    throw ValidationError("pixel latitude outside [-90, 90]");
  }
  if (!(rec.height_deg > 0.0) || !(rec.width_deg > 0.0)) {
    throw ValidationError("pixel extents must be strictly positive");
  }
  if (rec.quality != QualityFlag::missing) {
    if (!std::isfinite(rec.radiance) || rec.radiance < 0.0) {
      throw ValidationError("non-missing radiance must be finite and >= 0");
    }
  }
}

void validate(const NtlSeries& series) {
  if (series.values.size() != series.gap_mask.size()) {
    throw ValidationError("series values and gap mask lengths differ");
  }
  for (std::size_t i = 0; i < series.values.size(); ++i) {
    if (!series.gap_mask[i]) {
      if (!std::isfinite(series.values[i]) || series.values[i] < 0.0) {
        throw ValidationError("unmasked radiance must be finite and >= 0 at index " +
                              std::to_string(i));
      }
    }
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  fs::create_directories(dir, ec);

  fs::path tmp = dir / (path.filename().string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open temp file " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw IoError("failed writing temp file " + tmp.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("failed renaming " + tmp.string() + " to " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& token, const std::string& context) {
  if (token.empty()) throw ParseError(context + ": empty numeric field");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size() || errno == ERANGE) {
    throw ParseError(context + ": cannot parse number '" + token + "'");
  }
  return v;
}

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void expect_header(const std::vector<std::string>& lines, const std::string& expected,
                   const std::filesystem::path& path) {
  if (lines.empty()) throw ParseError(path.string() + ": empty file");
  const std::string& head = lines.front();
  if (head != expected) {
    throw ParseError(path.string() + ": expected header '" + expected + "', got '" + head + "'");
  }
}

std::string line_context(const std::filesystem::path& path, std::size_t lineno) {
  return path.string() + ":" + std::to_string(lineno);
}

}  // namespace

std::vector<PixelRecord> read_pixel_csv(const std::filesystem::path& path) {
  static const std::string kHeader =
      "date,pixel_id,radiance,latitude,pixel_height_deg,pixel_width_deg,quality";
  const auto lines = read_lines(path);
  expect_header(lines, kHeader, path);

  std::vector<PixelRecord> records;
  records.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto ctx = line_context(path, i + 1);
    const auto f = split_csv_line(lines[i]);
    if (f.size() != 7) {
      throw ParseError(ctx + ": expected 7 fields, got " + std::to_string(f.size()));
    }
    PixelRecord rec;
    try {
      rec.date = Date::parse(f[0]);
      rec.pixel_id = f[1];
      rec.quality = quality_from_string(f[6]);
      rec.radiance = (rec.quality == QualityFlag::missing && f[2].empty())
                         ? 0.0
                         : parse_double(f[2], ctx + " radiance");
      rec.latitude_deg = parse_double(f[3], ctx + " latitude");
      rec.height_deg = parse_double(f[4], ctx + " pixel_height_deg");
      rec.width_deg = parse_double(f[5], ctx + " pixel_width_deg");
      validate(rec);
    } catch (const Error& e) {
      throw ParseError(ctx + ": " + e.what());
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_pixel_csv(const std::vector<PixelRecord>& records,
                     const std::filesystem::path& path) {
  std::string out = "date,pixel_id,radiance,latitude,pixel_height_deg,pixel_width_deg,quality\n";
  char buf[160];
  for (const auto& rec : records) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.12g,%.12g,%.12g,%.12g,%s\n",
                  rec.date.to_string().c_str(), rec.pixel_id.c_str(), rec.radiance,
                  rec.latitude_deg, rec.height_deg, rec.width_deg,
                  to_string(rec.quality).c_str());
    out += buf;
  }
  write_file_atomic(path, out);
}

NtlSeries read_zone_csv(const std::filesystem::path& path, const std::string& zone_id) {
  const auto lines = read_lines(path);
  expect_header(lines, "date,radiance,gap", path);

  NtlSeries series;
  series.zone_id = zone_id;
  bool first = true;
  Date prev;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto ctx = line_context(path, i + 1);
    const auto f = split_csv_line(lines[i]);
    if (f.size() != 3) {
      throw ParseError(ctx + ": expected 3 fields, got " + std::to_string(f.size()));
    }
    Date d;
    try {
      d = Date::parse(f[0]);
    } catch (const Error& e) {
      throw ParseError(ctx + ": " + e.what());
    }
    if (first) {
      series.start_date = d;
      first = false;
    } else if (d - prev != 1) {
      throw ValidationError(ctx + ": dates must be consecutive calendar days");
    }
    prev = d;

    bool gap;
    if (f[2] == "0") {
      gap = false;
    } else if (f[2] == "1") {
      gap = true;
    } else {
      throw ParseError(ctx + ": gap flag must be 0 or 1, got '" + f[2] + "'");
    }
    double value = 0.0;
    if (!gap) {
      value = parse_double(f[1], ctx + " radiance");
      if (!std::isfinite(value) || value < 0.0) {
        throw ValidationError(ctx + ": radiance must be finite and >= 0");
      }
    } else if (!f[1].empty()) {
      value = parse_double(f[1], ctx + " radiance");
    }
    series.values.push_back(value);
    series.gap_mask.push_back(gap);
  }
  if (series.values.empty()) throw ValidationError(path.string() + ": no data rows");
  return series;
}

void write_zone_csv(const NtlSeries& series, const std::filesystem::path& path) {
  validate(series);
  std::string out = "date,radiance,gap\n";
  char buf[64];
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series.gap_mask[i]) {
      out += series.date_at(i).to_string() + ",,1\n";
    } else {
      std::snprintf(buf, sizeof(buf), "%.12g", series.values[i]);
      out += series.date_at(i).to_string() + "," + buf + ",0\n";
    }
  }
  write_file_atomic(path, out);
}

}  // namespace ntlc
