#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ntlc/date.hpp"
#include "ntlc/detect.hpp"

namespace ntlc {

struct GroundTruthEvent {
  std::string zone_id;
  Date start;
  std::optional<Date> end;  // absent for events with no recorded end
  std::string change_type;  // disaster | conflict | urbanization
  std::string unit;         // daily | yearly
};

void validate(const GroundTruthEvent& event);

/// CSV schema `zone_id,start,end,change_type,unit`; an empty end field marks
/// an open event.
std::vector<GroundTruthEvent> read_truth_csv(const std::string& path);
void write_truth_csv(const std::string& path, const std::vector<GroundTruthEvent>& events);

/// Weighted harmonic mean of precision and recall; beta > 1 weighs recall.
/// Defined as 0 when both inputs are 0.
double f_beta(double precision, double recall, double beta = 2.0);

struct EvalReport {
  std::string zone_id;
  std::string unit = "daily";
  double beta = 2.0;
  std::size_t tp = 0, fp = 0, fn = 0;
  // Detections outside every truth window whose observation deviates beyond
  // the no-change band: credited to neither TP nor FP.
  std::size_t uncredited = 0;
  std::optional<double> recall;     // absent when the truth set is empty
  std::optional<double> precision;  // absent when nothing was detected
  std::optional<double> f_beta_score;
  std::optional<double> delay;  // unit steps; negative = detection led truth
  double baseline_median = 0.0;
};

/// Scores the persistent detections of a change report against ground truth
/// for the same zone. Daily units compare step sets (the detection set is
/// every segment-covered step with a defined residual; false positives are
/// gated by the no-change band around the baseline median). Yearly units
/// compare calendar years with a +/- 1 year matching buffer.
EvalReport evaluate(const ChangeReport& report, const std::vector<GroundTruthEvent>& truth,
                    double beta = 2.0);

std::string eval_report_to_json(const EvalReport& report);

}  // namespace ntlc
