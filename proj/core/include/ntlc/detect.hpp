#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ntlc/date.hpp"
#include "ntlc/forecast.hpp"
#include "ntlc/series.hpp"

namespace ntlc {

/// Signed forecast errors, aligned with a series span. Defined exactly where
/// the observation is unmasked and the ensemble prediction exists.
struct ResidualSeries {
  Date start_date;
  std::vector<std::optional<double>> r;

  std::size_t size() const { return r.size(); }
  Date date_at(std::size_t i) const { return start_date + static_cast<std::int64_t>(i); }
};

ResidualSeries residuals(const NtlSeries& observed, const EnsembleForecast& ens);

enum class TauMode { batch, streaming };

std::string tau_mode_name(TauMode m);
TauMode tau_mode_from_string(const std::string& s);

/// Linear-interpolation percentile over the order statistics (pct in [0,100]).
double percentile_interpolated(std::vector<double> values, double pct);

struct ThresholdResult {
  double tau = 0.0;                          // batch threshold (squared units)
  std::vector<std::optional<double>> tau_per_step;  // streaming thresholds
  std::vector<bool> flagged;                 // aligned with the residuals
};

/// Retrospective threshold over the whole monitored span: tau is the
/// (100 - t_percent)th percentile of the squared residuals and steps are
/// flagged where r^2 exceeds it strictly. When ties at tau leave the flagged
/// count below the floor(n*T/100) quota, steps equal to tau (and above the
/// minimum) fill the deficit, most recent first.
ThresholdResult threshold(const ResidualSeries& res, double t_percent = 25.0);

/// Sequential variant: each step's tau comes from the trailing window_days of
/// defined squared residuals (current step included); steps with fewer than
/// min_history defined residuals behind them are never flagged.
ThresholdResult threshold_streaming(const ResidualSeries& res, double t_percent = 25.0,
                                    std::size_t window_days = 365,
                                    std::size_t min_history = 60);

struct DetectConfig {
  double t_percent = 25.0;
  TauMode tau_mode = TauMode::batch;
  std::size_t streaming_window = 365;
  std::size_t streaming_min_history = 60;
  std::size_t min_persistence = 7;  // days; shorter runs are transients
  std::size_t gap_tolerance = 3;    // unflagged days bridged inside a run
  double recovery_band = 0.10;      // fraction of the baseline median
};

void validate(const DetectConfig& cfg);

/// A persistent run of flagged steps. Indices refer to the monitored span.
struct Segment {
  std::size_t start = 0;
  std::size_t inflection = 0;  // first step of maximum |r| within the segment
  std::size_t end = 0;
  bool open_ended = false;     // still active at the end of the span
  double start_rate = 0.0;     // observed-value slope start -> inflection
  double end_rate = 0.0;       // observed-value slope inflection -> end
  double mean_severity = 0.0;  // mean |r| over defined steps in the segment
  int direction = 0;           // sign of the mean residual
};

std::vector<Segment> segments(const ResidualSeries& res, const NtlSeries& observed,
                              const std::vector<bool>& flagged, const DetectConfig& cfg);

enum class Phase { baseline, change, continuing_recovery, full_recovery };

std::string phase_name(Phase p);
Phase phase_from_string(const std::string& s);

/// Per-step labels over the monitored span: baseline until a segment starts,
/// change from segment start through its inflection, continuing_recovery
/// while the observation stays outside the recovery band around the
/// pre-change median, then full_recovery until the next segment.
std::vector<Phase> phase_labels(const NtlSeries& observed, const std::vector<Segment>& segs,
                                double baseline_median, double recovery_band);

/// Per-step count of ensemble members whose own squared residual exceeds
/// their own threshold (same t_percent and mode as the ensemble detector).
/// Returned per monitored step, i.e. slice indices >= input_window.
std::vector<int> member_confidence(const NtlSeries& slice, const EnsembleForecast& ens,
                                   const DetectConfig& cfg, std::size_t input_window);

/// Everything the detector derives from one monitored span, aligned per step.
struct ChangeReport {
  std::string zone_id;
  Date start_date;
  double baseline_median = 0.0;
  DetectConfig config;
  double tau = 0.0;  // batch mode only; 0 when streaming
  std::vector<std::optional<double>> observed;
  std::vector<std::optional<double>> ensemble;
  std::vector<std::optional<double>> r;
  std::vector<bool> flagged;
  std::vector<Phase> phase;
  std::vector<int> confidence;
  std::vector<Segment> segs;

  std::size_t size() const { return r.size(); }
};

/// Runs the full detection pass over a slice of a series: the first
/// input_window days of `slice` are forecasting context only, and every
/// later day is a monitored step.
ChangeReport detect_changes(const std::string& zone_id, const NtlSeries& slice,
                            const EnsembleForecast& ens, double baseline_median,
                            const DetectConfig& cfg, std::size_t input_window);

std::string change_report_to_json(const ChangeReport& report);
ChangeReport change_report_from_json(const std::string& text);

}  // namespace ntlc
