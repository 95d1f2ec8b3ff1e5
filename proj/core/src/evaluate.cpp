#include "ntlc/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "ntlc/csvio.hpp"
#include "ntlc/errors.hpp"

namespace ntlc {

using json = nlohmann::ordered_json;

void validate(const GroundTruthEvent& event) {
  if (event.zone_id.empty()) throw ValidationError("ground truth: empty zone_id");
  if (event.change_type != "disaster" && event.change_type != "conflict" &&
      event.change_type != "urbanization") {
    throw ValidationError("ground truth: unknown change_type '" + event.change_type + "'");
  }
  if (event.unit != "daily" && event.unit != "yearly") {
    throw ValidationError("ground truth: unknown unit '" + event.unit + "'");
  }
  if (event.unit == "yearly" && event.change_type != "urbanization") {
    throw ValidationError("ground truth: yearly units are reserved for urbanization");
  }
  if (event.end.has_value() && *event.end < event.start) {
    throw ValidationError("ground truth: event ends before it starts");
  }
}

std::vector<GroundTruthEvent> read_truth_csv(const std::string& path) {
  const std::string text = read_file(path);
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw ParseError(path + ": empty ground-truth file");
  if (split_csv_line(lines[0]) !=
      std::vector<std::string>{"zone_id", "start", "end", "change_type", "unit"}) {
    throw ParseError(path + ": expected header zone_id,start,end,change_type,unit");
  }
  std::vector<GroundTruthEvent> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split_csv_line(lines[i]);
    if (f.size() != 5) {
      throw ParseError(path + " line " + std::to_string(i + 1) + ": expected 5 fields");
    }
    GroundTruthEvent e;
    e.zone_id = f[0];
    e.start = Date::parse(f[1]);
    if (!f[2].empty()) e.end = Date::parse(f[2]);
    e.change_type = f[3];
    e.unit = f[4];
    validate(e);
    out.push_back(std::move(e));
  }
  return out;
}

void write_truth_csv(const std::string& path, const std::vector<GroundTruthEvent>& events) {
  std::string out = "zone_id,start,end,change_type,unit\n";
  for (const GroundTruthEvent& e : events) {
    validate(e);
    out += e.zone_id + ',' + e.start.to_string() + ',' +
           (e.end.has_value() ? e.end->to_string() : std::string()) + ',' + e.change_type +
           ',' + e.unit + '\n';
  }
  write_file_atomic(path, out);
}

double f_beta(double precision, double recall, double beta) {
  if (precision < 0.0 || precision > 1.0 || recall < 0.0 || recall > 1.0) {
    throw DomainError("f_beta: precision and recall must be in [0, 1]");
  }
  if (!(beta > 0.0)) throw DomainError("f_beta: beta must be > 0");
  if (precision == 0.0 && recall == 0.0) return 0.0;
  const double b2 = beta * beta;
  return (1.0 + b2) * precision * recall / (b2 * precision + recall);
}

namespace {

EvalReport evaluate_daily(const ChangeReport& report,
                          const std::vector<GroundTruthEvent>& truth, double beta) {
  EvalReport out;
  out.zone_id = report.zone_id;
  out.unit = "daily";
  out.beta = beta;
  out.baseline_median = report.baseline_median;
  const std::size_t n = report.size();
  const Date last = report.start_date + static_cast<std::int64_t>(n - 1);

  std::vector<bool> detected(n, false);
  for (const Segment& s : report.segs) {
    for (std::size_t t = s.start; t <= s.end; ++t) {
      if (report.r[t].has_value()) detected[t] = true;
    }
  }
  std::vector<bool> in_truth(n, false);
  for (const GroundTruthEvent& e : truth) {
    const Date stop = e.end.has_value() ? std::min(*e.end, last) : last;
    for (Date d = std::max(e.start, report.start_date); !(stop < d); d = d + 1) {
      const std::size_t t = static_cast<std::size_t>(d - report.start_date);
      if (report.r[t].has_value()) in_truth[t] = true;  // detectable steps only
    }
  }

  const double band = report.config.recovery_band * std::abs(report.baseline_median);
  std::size_t n_truth = 0, n_detected = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (in_truth[t]) ++n_truth;
    if (detected[t]) ++n_detected;
    if (detected[t] && in_truth[t]) {
      ++out.tp;
    } else if (!detected[t] && in_truth[t]) {
      ++out.fn;
    } else if (detected[t] && !in_truth[t]) {
      // The paper's no-change definition gates false positives: a detection
      // at a step whose observation clearly deviates from the baseline is
      // neither confirmed nor refuted by the truth record.
      if (report.observed[t].has_value() &&
          std::abs(*report.observed[t] - report.baseline_median) <= band) {
        ++out.fp;
      } else {
        ++out.uncredited;
      }
    }
  }

  if (n_truth > 0) out.recall = static_cast<double>(out.tp) / static_cast<double>(n_truth);
  if (n_detected > 0 && out.tp + out.fp > 0) {
    out.precision =
        static_cast<double>(out.tp) / static_cast<double>(out.tp + out.fp);
  }
  if (out.recall.has_value() && out.precision.has_value()) {
    out.f_beta_score = f_beta(*out.precision, *out.recall, beta);
  }

  if (!truth.empty()) {
    Date truth_start = truth[0].start;
    for (const GroundTruthEvent& e : truth) truth_start = std::min(truth_start, e.start);
    for (const Segment& s : report.segs) {
      const Date seg_start = report.start_date + static_cast<std::int64_t>(s.start);
      const Date seg_end = report.start_date + static_cast<std::int64_t>(s.end);
      bool intersects = false;
      for (const GroundTruthEvent& e : truth) {
        const Date stop = e.end.has_value() ? *e.end : last;
        if (!(seg_end < e.start) && !(stop < seg_start)) {
          intersects = true;
          break;
        }
      }
      if (intersects) {
        out.delay = static_cast<double>(seg_start - truth_start);
        break;
      }
    }
  }
  return out;
}

EvalReport evaluate_yearly(const ChangeReport& report,
                           const std::vector<GroundTruthEvent>& truth, double beta) {
  EvalReport out;
  out.zone_id = report.zone_id;
  out.unit = "yearly";
  out.beta = beta;
  out.baseline_median = report.baseline_median;
  const Date last = report.start_date + static_cast<std::int64_t>(report.size() - 1);

  std::set<int> flagged_years;
  for (const Segment& s : report.segs) {
    const int y0 = (report.start_date + static_cast<std::int64_t>(s.start)).year();
    const int y1 = (report.start_date + static_cast<std::int64_t>(s.end)).year();
    for (int y = y0; y <= y1; ++y) flagged_years.insert(y);
  }
  std::set<int> truth_years;
  for (const GroundTruthEvent& e : truth) {
    const int y1 = e.end.has_value() ? e.end->year() : last.year();
    for (int y = e.start.year(); y <= y1; ++y) truth_years.insert(y);
  }

  // +/- 1 year matching buffer in both directions.
  auto matched = [](const std::set<int>& a, int y) {
    return a.count(y - 1) || a.count(y) || a.count(y + 1);
  };
  for (int y : truth_years) {
    if (matched(flagged_years, y)) {
      ++out.tp;
    } else {
      ++out.fn;
    }
  }
  for (int y : flagged_years) {
    if (!matched(truth_years, y)) ++out.fp;
  }

  if (!truth_years.empty()) {
    out.recall = static_cast<double>(out.tp) / static_cast<double>(out.tp + out.fn);
  }
  if (!flagged_years.empty()) {
    out.precision = static_cast<double>(out.tp) / static_cast<double>(out.tp + out.fp);
    if (out.precision > 1.0) out.precision = 1.0;  // tp counts truth years
  }
  if (out.recall.has_value() && out.precision.has_value()) {
    out.f_beta_score = f_beta(*out.precision, *out.recall, beta);
  }
  if (!truth_years.empty() && !flagged_years.empty()) {
    const int first_truth = *truth_years.begin();
    for (int y : flagged_years) {
      if (matched(truth_years, y)) {
        out.delay = static_cast<double>(y - first_truth);
        break;
      }
    }
  }
  return out;
}

}  // namespace

EvalReport evaluate(const ChangeReport& report, const std::vector<GroundTruthEvent>& truth,
                    double beta) {
  std::vector<GroundTruthEvent> zone_truth;
  for (const GroundTruthEvent& e : truth) {
    validate(e);
    if (e.zone_id == report.zone_id) zone_truth.push_back(e);
  }
  bool yearly = false;
  for (const GroundTruthEvent& e : zone_truth) {
    if (e.unit == "yearly") yearly = true;
  }
  for (const GroundTruthEvent& e : zone_truth) {
    if ((e.unit == "yearly") != yearly) {
      throw ValidationError("ground truth mixes daily and yearly units for one zone");
    }
  }
  if (report.size() == 0) throw InsufficientDataError("evaluate: empty change report");
  return yearly ? evaluate_yearly(report, zone_truth, beta)
                : evaluate_daily(report, zone_truth, beta);
}

namespace {

json opt_json(const std::optional<double>& v) {
  if (v.has_value()) return *v;
  return nullptr;
}

}  // namespace

std::string eval_report_to_json(const EvalReport& report) {
  json j;
  j["format"] = "ntlchange-eval-report";
  j["format_version"] = 1;
  j["zone_id"] = report.zone_id;
  j["unit"] = report.unit;
  j["beta"] = report.beta;
  j["tp"] = report.tp;
  j["fp"] = report.fp;
  j["fn"] = report.fn;
  j["uncredited"] = report.uncredited;
  j["recall"] = opt_json(report.recall);
  j["precision"] = opt_json(report.precision);
  j["f_beta"] = opt_json(report.f_beta_score);
  j["delay"] = opt_json(report.delay);
  j["baseline_median"] = report.baseline_median;
  return j.dump(2) + "\n";
}

}  // namespace ntlc
