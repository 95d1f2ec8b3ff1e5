#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ntlc/csvio.hpp"
#include "ntlc/date.hpp"
#include "ntlc/errors.hpp"
#include "ntlc/series.hpp"

using namespace ntlc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "ntlc_csvio_tests";
  fs::create_directories(dir);
  return dir / name;
}

void put(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("split_csv_line") {
  CHECK(split_csv_line("a,b,c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_csv_line("") == std::vector<std::string>{""});
  CHECK(split_csv_line(",,") == std::vector<std::string>{"", "", ""});
  CHECK(split_csv_line("x,") == std::vector<std::string>{"x", ""});
  // Carriage returns from CRLF files are stripped.
  CHECK(split_csv_line("a,b\r") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("parse_double") {
  CHECK(parse_double("2.5", "t") == 2.5);
  CHECK(parse_double("-1e3", "t") == -1000.0);
  CHECK(parse_double("0", "t") == 0.0);
  CHECK_THROWS_AS(parse_double("", "t"), ParseError);
  CHECK_THROWS_AS(parse_double("12x", "t"), ParseError);
  CHECK_THROWS_AS(parse_double("1e999", "t"), ParseError);
  CHECK_THROWS_AS(parse_double("--3", "t"), ParseError);
}

TEST_CASE("atomic write then read") {
  const fs::path p = scratch("atomic.txt");
  write_file_atomic(p, "hello\nworld");
  CHECK(read_file(p) == "hello\nworld");
  write_file_atomic(p, "second");
  CHECK(read_file(p) == "second");
  CHECK_THROWS_AS(read_file(scratch("does_not_exist.txt")), IoError);
}

TEST_CASE("zone series round trip preserves values and gaps") {
  NtlSeries s;
  s.zone_id = "zoneA";
  s.start_date = Date(2014, 12, 30);
  s.values = {10.0, 0.0, 0.0, 12.75, 3.5};
  s.gap_mask = {false, false, true, false, false};

  const fs::path p = scratch("zone_roundtrip.csv");
  write_zone_csv(s, p);

  const std::string expected =
      "date,radiance,gap\n"
      "2014-12-30,10,0\n"
      "2014-12-31,0,0\n"
      "2015-01-01,,1\n"
      "2015-01-02,12.75,0\n"
      "2015-01-03,3.5,0\n";
  CHECK(read_file(p) == expected);

  const NtlSeries back = read_zone_csv(p, "zoneA");
  CHECK(back.zone_id == "zoneA");
  CHECK(back.start_date == s.start_date);
  CHECK(back.values == s.values);
  CHECK(back.gap_mask == s.gap_mask);
}

TEST_CASE("zone series read rejects malformed input") {
  const fs::path p = scratch("zone_bad.csv");

  put(p, "");
  CHECK_THROWS_AS(read_zone_csv(p, "z"), ParseError);

  put(p, "radiance,gap\n2015-01-01,1,0\n");
  CHECK_THROWS_AS(read_zone_csv(p, "z"), ParseError);

  put(p, "date,radiance,gap\n");
  CHECK_THROWS_AS(read_zone_csv(p, "z"), ValidationError);

  // Dates must advance one calendar day per row.
  put(p, "date,radiance,gap\n2015-01-01,1,0\n2015-01-03,2,0\n");
  CHECK_THROWS_AS(read_zone_csv(p, "z"), ValidationError);

  put(p, "date,radiance,gap\n2015-01-01,1,2\n");
  CHECK_THROWS_AS(read_zone_csv(p, "z"), ParseError);

  put(p, "date,radiance,gap\n2015-01-01,,0\n");
  CHECK_THROWS_AS(read_zone_csv(p, "z"), ParseError);

  put(p, "date,radiance,gap\n2015-01-01,-4,0\n");
  CHECK_THROWS_AS(read_zone_csv(p, "z"), ValidationError);

  put(p, "date,radiance,gap\n2015-01-01,1,0,9\n");
  CHECK_THROWS_AS(read_zone_csv(p, "z"), ParseError);
}

TEST_CASE("zone series read tolerates CRLF and blank lines") {
  const fs::path p = scratch("zone_crlf.csv");
  put(p, "date,radiance,gap\r\n2015-01-01,1.5,0\r\n\r\n2015-01-02,,1\r\n");
  const NtlSeries s = read_zone_csv(p, "z");
  REQUIRE(s.size() == 2);
  CHECK(s.values[0] == 1.5);
  CHECK(s.gap_mask[1]);
}

TEST_CASE("pixel records round trip") {
  std::vector<PixelRecord> recs(3);
  recs[0].date = Date(2015, 1, 1);
  recs[0].pixel_id = "p1";
  recs[0].radiance = 5.25;
  recs[0].latitude_deg = 10.0;
  recs[0].height_deg = 1.0 / 240.0;
  recs[0].width_deg = 1.0 / 240.0;
  recs[0].quality = QualityFlag::good;
  recs[1] = recs[0];
  recs[1].pixel_id = "p2";
  recs[1].radiance = 0.0;
  recs[1].quality = QualityFlag::gapfilled;
  recs[2] = recs[0];
  recs[2].date = Date(2015, 1, 2);
  recs[2].radiance = 0.0;
  recs[2].quality = QualityFlag::missing;

  const fs::path p = scratch("pixels_roundtrip.csv");
  write_pixel_csv(recs, p);
  const auto back = read_pixel_csv(p);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].date == recs[i].date);
    CHECK(back[i].pixel_id == recs[i].pixel_id);
    CHECK(back[i].radiance == recs[i].radiance);
    CHECK(back[i].latitude_deg == recs[i].latitude_deg);
    // the writer keeps 12 significant digits, so 1/240 does not survive bitwise
    CHECK(back[i].height_deg == doctest::Approx(recs[i].height_deg).epsilon(1e-11));
    CHECK(back[i].width_deg == doctest::Approx(recs[i].width_deg).epsilon(1e-11));
    CHECK(back[i].quality == recs[i].quality);
  }
}

TEST_CASE("pixel read rules") {
  const fs::path p = scratch("pixels_rules.csv");
  const std::string header =
      "date,pixel_id,radiance,latitude,pixel_height_deg,pixel_width_deg,quality\n";

  // Missing rows may leave radiance empty; it reads back as zero.
  put(p, header + "2015-01-01,p1,,10,0.004,0.004,missing\n");
  auto recs = read_pixel_csv(p);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].radiance == 0.0);
  CHECK(recs[0].quality == QualityFlag::missing);

  put(p, header + "2015-01-01,p1,,10,0.004,0.004,good\n");
  CHECK_THROWS_AS(read_pixel_csv(p), ParseError);

  put(p, header + "2015-01-01,p1,1.0,10,0.004,0.004,excellent\n");
  CHECK_THROWS_AS(read_pixel_csv(p), ParseError);

  put(p, header + "2015-01-01,p1,-2,10,0.004,0.004,good\n");
  CHECK_THROWS_AS(read_pixel_csv(p), ParseError);

  put(p, header + "2015-01-01,p1,1.0,95,0.004,0.004,good\n");
  CHECK_THROWS_AS(read_pixel_csv(p), ParseError);

  put(p, header + "2015-01-01,p1,1.0,10,0.004,0.004\n");
  CHECK_THROWS_AS(read_pixel_csv(p), ParseError);

  put(p, "wrong,header\n");
  CHECK_THROWS_AS(read_pixel_csv(p), ParseError);
}

TEST_CASE("series validation") {
  NtlSeries s;
  s.zone_id = "z";
  s.start_date = Date(2015, 1, 1);
  s.values = {1.0, -1.0};
  s.gap_mask = {false, false};
  CHECK_THROWS_AS(validate(s), ValidationError);
  s.gap_mask = {false, true};  // masked values may hold anything
  CHECK_NOTHROW(validate(s));
  s.gap_mask = {false};
  CHECK_THROWS_AS(validate(s), ValidationError);
}
