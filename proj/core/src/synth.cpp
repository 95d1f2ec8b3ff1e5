#include "ntlc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "ntlc/errors.hpp"

namespace ntlc {

using json = nlohmann::ordered_json;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kNoChangeBand = 0.10;  // fraction of baseline; truth ends inside it
constexpr double kYearWrap = 365.0;     // circular day-of-year distance

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double day_of_year(const Date& d) {
  return static_cast<double>(d - Date(d.year(), 1, 1)) + 1.0;
}

}  // namespace

std::string change_kind_name(ChangeKind k) {
  switch (k) {
    case ChangeKind::none: return "none";
    case ChangeKind::abrupt_drop: return "abrupt_drop";
    case ChangeKind::gradual_ramp: return "gradual_ramp";
  }
  throw DomainError("invalid change kind");
}

ChangeKind change_kind_from_string(const std::string& s) {
  if (s == "none") return ChangeKind::none;
  if (s == "abrupt_drop") return ChangeKind::abrupt_drop;
  if (s == "gradual_ramp") return ChangeKind::gradual_ramp;
  throw ParseError("unknown change kind '" + s + "'");
}

void validate(const ScenarioSpec& spec) {
  if (spec.zone_id.empty()) throw ConfigError("scenario: empty zone_id");
  if (spec.length_days < 1) throw ConfigError("scenario: length_days must be >= 1");
  if (!(spec.baseline > 0.0)) throw ConfigError("scenario: baseline must be > 0");
  if (spec.seasonal_amplitude < 0.0) {
    throw ConfigError("scenario: seasonal amplitude must be >= 0");
  }
  if (!(spec.seasonal_period > 0.0)) {
    throw ConfigError("scenario: seasonal period must be > 0");
  }
  if (spec.noise_fraction < 0.0) throw ConfigError("scenario: noise fraction must be >= 0");
  if (spec.noise_sigma.has_value() && *spec.noise_sigma < 0.0) {
    throw ConfigError("scenario: noise sigma must be >= 0");
  }
  for (const HolidaySpike& h : spec.holidays) {
    if (h.day_of_year < 1.0 || h.day_of_year > 366.0) {
      throw ConfigError("scenario: holiday day_of_year must be in [1, 366]");
    }
    if (!(h.width_days > 0.0)) throw ConfigError("scenario: holiday width must be > 0");
  }
  if (spec.change != ChangeKind::none) {
    const std::int64_t off = spec.change_start - spec.start_date;
    if (off < 0 || off >= static_cast<std::int64_t>(spec.length_days)) {
      throw ConfigError("scenario: change start must fall inside the series span");
    }
  }
  if (spec.change == ChangeKind::abrupt_drop) {
    if (!(spec.drop_depth > 0.0)) throw ConfigError("scenario: drop depth must be > 0");
    if (spec.recovery_days.has_value() && !(*spec.recovery_days > 0.0)) {
      throw ConfigError("scenario: recovery span must be > 0");
    }
  }
  if (spec.change == ChangeKind::gradual_ramp && !(spec.ramp_slope > 0.0)) {
    throw ConfigError("scenario: ramp slope must be > 0");
  }
}

SynthResult generate(const ScenarioSpec& spec) {
  validate(spec);
  const double sigma = spec.noise_sigma.has_value() ? *spec.noise_sigma
                                                    : spec.noise_fraction * spec.baseline;
  std::mt19937_64 rng(splitmix64(spec.seed));
  std::normal_distribution<double> noise(0.0, 1.0);

  SynthResult out;
  out.series.zone_id = spec.zone_id;
  out.series.start_date = spec.start_date;
  out.series.values.resize(spec.length_days);
  out.series.gap_mask.assign(spec.length_days, false);

  const std::int64_t t0 = spec.change == ChangeKind::none
                              ? 0
                              : spec.change_start - spec.start_date;
  for (std::size_t t = 0; t < spec.length_days; ++t) {
    const Date date = spec.start_date + static_cast<std::int64_t>(t);
    double v = spec.baseline +
               spec.seasonal_amplitude *
                   std::sin(2.0 * kPi * static_cast<double>(t) / spec.seasonal_period);
    const double doy = day_of_year(date);
    for (const HolidaySpike& h : spec.holidays) {
      double dist = std::abs(doy - h.day_of_year);
      dist = std::min(dist, kYearWrap - dist);
      v += h.amplitude * std::exp(-dist * dist / (2.0 * h.width_days * h.width_days));
    }
    const std::int64_t dt = static_cast<std::int64_t>(t) - t0;
    if (spec.change == ChangeKind::abrupt_drop && dt >= 0) {
      double deficit = spec.drop_depth;
      if (spec.recovery_days.has_value()) {
        // Exponential return with time constant recovery_days / 5, so the
        // deficit is down to ~0.7% of the drop when the span elapses.
        deficit *= std::exp(-5.0 * static_cast<double>(dt) / *spec.recovery_days);
      }
      v -= deficit;
    } else if (spec.change == ChangeKind::gradual_ramp && dt >= 0) {
      v += spec.ramp_slope * static_cast<double>(dt + 1);
    }
    v += sigma == 0.0 ? 0.0 : sigma * noise(rng);
    out.series.values[t] = std::max(0.0, v);
  }

  if (spec.change == ChangeKind::abrupt_drop) {
    GroundTruthEvent e;
    e.zone_id = spec.zone_id;
    e.start = spec.change_start;
    e.unit = "daily";
    if (spec.recovery_days.has_value()) {
      e.change_type = "disaster";
      const double band = kNoChangeBand * spec.baseline;
      std::int64_t span = 0;
      if (spec.drop_depth > band) {
        // First day the decaying deficit is back inside the no-change band.
        span = static_cast<std::int64_t>(
            std::ceil(*spec.recovery_days / 5.0 * std::log(spec.drop_depth / band)));
      }
      const std::int64_t last = static_cast<std::int64_t>(spec.length_days) - 1;
      e.end = spec.start_date + std::min(t0 + span, last);
    } else {
      e.change_type = "conflict";  // sustained loss, no recorded end
    }
    out.truth.push_back(std::move(e));
  } else if (spec.change == ChangeKind::gradual_ramp) {
    GroundTruthEvent e;
    e.zone_id = spec.zone_id;
    e.start = spec.change_start;
    e.change_type = "urbanization";
    e.unit = "yearly";
    out.truth.push_back(std::move(e));
  }
  return out;
}

NtlSeries inject_gaps(const NtlSeries& series, double gap_fraction, std::uint64_t seed) {
  if (gap_fraction < 0.0 || gap_fraction >= 0.5) {
    throw DomainError("gap fraction must be in [0, 0.5)");
  }
  NtlSeries out = series;
  std::mt19937_64 rng(splitmix64(seed ^ 0x6A09E667F3BCC908ull));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (u(rng) < gap_fraction) out.gap_mask[t] = true;
  }
  return out;
}

ScenarioSpec scenario_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ScenarioSpec spec;
    spec.zone_id = j.value("zone_id", spec.zone_id);
    spec.start_date = Date::parse(j.at("start_date").get<std::string>());
    spec.length_days = j.at("length_days").get<std::size_t>();
    spec.baseline = j.at("baseline").get<double>();
    spec.seasonal_amplitude = j.value("seasonal_amplitude", 0.0);
    spec.seasonal_period = j.value("seasonal_period", 365.0);
    spec.noise_fraction = j.value("noise_fraction", 0.03);
    if (j.contains("noise_sigma")) spec.noise_sigma = j.at("noise_sigma").get<double>();
    if (j.contains("holidays")) {
      for (const json& h : j.at("holidays")) {
        spec.holidays.push_back({h.at("day_of_year").get<double>(),
                                 h.at("amplitude").get<double>(),
                                 h.at("width_days").get<double>()});
      }
    }
    if (j.contains("change")) {
      const json& c = j.at("change");
      spec.change = change_kind_from_string(c.at("kind").get<std::string>());
      if (spec.change != ChangeKind::none) {
        spec.change_start = Date::parse(c.at("start").get<std::string>());
      }
      if (spec.change == ChangeKind::abrupt_drop) {
        spec.drop_depth = c.at("depth").get<double>();
        if (c.contains("recovery_days") && !c.at("recovery_days").is_null()) {
          spec.recovery_days = c.at("recovery_days").get<double>();
        }
      }
      if (spec.change == ChangeKind::gradual_ramp) {
        spec.ramp_slope = c.at("slope").get<double>();
      }
    }
    spec.seed = j.value("seed", std::uint64_t{0});
    validate(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
}

std::string scenario_to_json(const ScenarioSpec& spec) {
  validate(spec);
  json j;
  j["zone_id"] = spec.zone_id;
  j["start_date"] = spec.start_date.to_string();
  j["length_days"] = spec.length_days;
  j["baseline"] = spec.baseline;
  j["seasonal_amplitude"] = spec.seasonal_amplitude;
  j["seasonal_period"] = spec.seasonal_period;
  j["noise_fraction"] = spec.noise_fraction;
  if (spec.noise_sigma.has_value()) j["noise_sigma"] = *spec.noise_sigma;
  if (!spec.holidays.empty()) {
    json hs = json::array();
    for (const HolidaySpike& h : spec.holidays) {
      hs.push_back({{"day_of_year", h.day_of_year},
                    {"amplitude", h.amplitude},
                    {"width_days", h.width_days}});
    }
    j["holidays"] = std::move(hs);
  }
  json c;
  c["kind"] = change_kind_name(spec.change);
  if (spec.change != ChangeKind::none) c["start"] = spec.change_start.to_string();
  if (spec.change == ChangeKind::abrupt_drop) {
    c["depth"] = spec.drop_depth;
    if (spec.recovery_days.has_value()) c["recovery_days"] = *spec.recovery_days;
  }
  if (spec.change == ChangeKind::gradual_ramp) c["slope"] = spec.ramp_slope;
  j["change"] = std::move(c);
  j["seed"] = spec.seed;
  return j.dump(2) + "\n";
}

}  // namespace ntlc
