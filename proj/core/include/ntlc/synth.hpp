#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ntlc/date.hpp"
#include "ntlc/evaluate.hpp"
#include "ntlc/series.hpp"

namespace ntlc {

struct HolidaySpike {
  double day_of_year = 0.0;  // center, 1-based
  double amplitude = 0.0;    // radiance added at the center
  double width_days = 1.0;   // Gaussian sigma
};

enum class ChangeKind { none, abrupt_drop, gradual_ramp };

std::string change_kind_name(ChangeKind k);
ChangeKind change_kind_from_string(const std::string& s);

struct ScenarioSpec {
  std::string zone_id = "synthetic";
  Date start_date;
  std::size_t length_days = 0;
  double baseline = 0.0;
  double seasonal_amplitude = 0.0;
  double seasonal_period = 365.0;
  double noise_fraction = 0.03;        // sigma = fraction * baseline ...
  std::optional<double> noise_sigma;   // ... unless given absolutely
  std::vector<HolidaySpike> holidays;
  ChangeKind change = ChangeKind::none;
  Date change_start;
  double drop_depth = 0.0;                  // abrupt_drop: radiance removed at onset
  std::optional<double> recovery_days;      // abrupt_drop: full recovery span; absent = none
  double ramp_slope = 0.0;                  // gradual_ramp: radiance gained per day
  std::uint64_t seed = 0;
};

void validate(const ScenarioSpec& spec);

ScenarioSpec scenario_from_json(const std::string& text);
std::string scenario_to_json(const ScenarioSpec& spec);

struct SynthResult {
  NtlSeries series;  // raw daily values, gap-free; radiance clamped at zero
  std::vector<GroundTruthEvent> truth;
};

/// Deterministic synthetic daily series: baseline + seasonal sinusoid +
/// holiday bumps + Gaussian noise, with the configured change archetype
/// injected at its start date. Drop-and-recover events end when the decaying
/// deficit re-enters the 10% no-change band; open-ended archetypes leave the
/// truth end absent.
SynthResult generate(const ScenarioSpec& spec);

/// Masks the given fraction of days at random (deterministic per seed).
NtlSeries inject_gaps(const NtlSeries& series, double gap_fraction, std::uint64_t seed);

}  // namespace ntlc
