#include "ntlc/detect.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "ntlc/errors.hpp"

namespace ntlc {

using json = nlohmann::ordered_json;

ResidualSeries residuals(const NtlSeries& observed, const EnsembleForecast& ens) {
  if (!(observed.start_date == ens.start_date) ||
      observed.size() != ens.prediction.size()) {
    throw AlignmentError("residuals: observation/forecast span mismatch");
  }
  ResidualSeries out;
  out.start_date = observed.start_date;
  out.r.assign(observed.size(), std::nullopt);
  for (std::size_t t = 0; t < observed.size(); ++t) {
    if (observed.gap_mask[t] || !ens.prediction[t].has_value()) continue;
    out.r[t] = observed.values[t] - *ens.prediction[t];
  }
  return out;
}

std::string tau_mode_name(TauMode m) {
  return m == TauMode::batch ? "batch" : "streaming";
}

TauMode tau_mode_from_string(const std::string& s) {
  if (s == "batch") return TauMode::batch;
  if (s == "streaming") return TauMode::streaming;
  throw ParseError("unknown tau mode '" + s + "' (expected batch or streaming)");
}

double percentile_interpolated(std::vector<double> values, double pct) {
  if (values.empty()) throw InsufficientDataError("percentile of no values");
  if (pct < 0.0 || pct > 100.0) throw DomainError("percentile must be in [0, 100]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * pct / 100.0;
  const std::size_t lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ThresholdResult threshold(const ResidualSeries& res, double t_percent) {
  if (!(t_percent > 0.0 && t_percent < 100.0)) {
    throw DomainError("threshold percentage must be in (0, 100)");
  }
  std::vector<std::size_t> defined;
  std::vector<double> sq;
  for (std::size_t t = 0; t < res.size(); ++t) {
    if (!res.r[t].has_value()) continue;
    defined.push_back(t);
    sq.push_back(*res.r[t] * *res.r[t]);
  }
  if (defined.empty()) throw InsufficientDataError("threshold: no defined residuals");

  ThresholdResult out;
  out.tau = percentile_interpolated(sq, 100.0 - t_percent);
  out.flagged.assign(res.size(), false);

  std::size_t flag_count = 0;
  for (std::size_t k = 0; k < defined.size(); ++k) {
    if (sq[k] > out.tau) {
      out.flagged[defined[k]] = true;
      ++flag_count;
    }
  }
  // Heavy ties at tau can starve the strict rule below its quota; fill from
  // tied steps (never from the distribution minimum), most recent first.
  const std::size_t quota = static_cast<std::size_t>(
      static_cast<double>(defined.size()) * t_percent / 100.0);
  if (flag_count < quota) {
    const double min_sq = *std::min_element(sq.begin(), sq.end());
    for (std::size_t k = defined.size(); k-- > 0 && flag_count < quota;) {
      if (sq[k] == out.tau && sq[k] > min_sq && !out.flagged[defined[k]]) {
        out.flagged[defined[k]] = true;
        ++flag_count;
      }
    }
  }
  return out;
}

ThresholdResult threshold_streaming(const ResidualSeries& res, double t_percent,
                                    std::size_t window_days, std::size_t min_history) {
  if (!(t_percent > 0.0 && t_percent < 100.0)) {
    throw DomainError("threshold percentage must be in (0, 100)");
  }
  if (window_days < 1 || min_history < 1) {
    throw DomainError("streaming threshold needs a positive window and history");
  }
  bool any = false;
  ThresholdResult out;
  out.flagged.assign(res.size(), false);
  out.tau_per_step.assign(res.size(), std::nullopt);
  std::vector<double> hist;
  for (std::size_t t = 0; t < res.size(); ++t) {
    if (!res.r[t].has_value()) continue;
    any = true;
    hist.clear();
    const std::size_t lo = t + 1 >= window_days ? t + 1 - window_days : 0;
    for (std::size_t u = lo; u <= t; ++u) {
      if (res.r[u].has_value()) hist.push_back(*res.r[u] * *res.r[u]);
    }
    if (hist.size() < min_history) continue;
    const double sq = *res.r[t] * *res.r[t];
    const double tau = percentile_interpolated(hist, 100.0 - t_percent);
    out.tau_per_step[t] = tau;
    out.flagged[t] = sq > tau;
  }
  if (!any) throw InsufficientDataError("threshold: no defined residuals");
  return out;
}

void validate(const DetectConfig& cfg) {
  if (!(cfg.t_percent > 0.0 && cfg.t_percent < 100.0)) {
    throw ConfigError("t_percent must be in (0, 100)");
  }
  if (cfg.min_persistence < 1) throw ConfigError("min_persistence must be >= 1");
  if (cfg.streaming_window < 1 || cfg.streaming_min_history < 1) {
    throw ConfigError("streaming window and min history must be >= 1");
  }
  if (!(cfg.recovery_band > 0.0)) throw ConfigError("recovery band must be > 0");
}

std::vector<Segment> segments(const ResidualSeries& res, const NtlSeries& observed,
                              const std::vector<bool>& flagged, const DetectConfig& cfg) {
  validate(cfg);
  if (observed.size() != res.size() || !(observed.start_date == res.start_date)) {
    throw AlignmentError("segments: residual/observation span mismatch");
  }
  if (flagged.size() != res.size()) {
    throw AlignmentError("segments: flag array size mismatch");
  }

  std::vector<std::size_t> flags;
  for (std::size_t t = 0; t < res.size(); ++t) {
    if (flagged[t] && res.r[t].has_value()) flags.push_back(t);
  }

  std::vector<Segment> out;
  std::size_t i = 0;
  while (i < flags.size()) {
    std::size_t j = i;
    while (j + 1 < flags.size() && flags[j + 1] - flags[j] - 1 <= cfg.gap_tolerance) ++j;
    const std::size_t s = flags[i], e = flags[j];
    i = j + 1;
    if (e - s + 1 < cfg.min_persistence) continue;

    Segment seg;
    seg.start = s;
    seg.end = e;
    seg.open_ended = res.size() - 1 - e <= cfg.gap_tolerance;

    double peak = -1.0, r_sum = 0.0, abs_sum = 0.0;
    std::size_t n_def = 0;
    seg.inflection = s;
    for (std::size_t t = s; t <= e; ++t) {
      if (!res.r[t].has_value()) continue;
      const double rv = *res.r[t];
      if (std::abs(rv) > peak) {
        peak = std::abs(rv);
        seg.inflection = t;
      }
      r_sum += rv;
      abs_sum += std::abs(rv);
      ++n_def;
    }
    seg.mean_severity = abs_sum / static_cast<double>(n_def);
    const double mean_r = r_sum / static_cast<double>(n_def);
    seg.direction = mean_r > 0.0 ? 1 : (mean_r < 0.0 ? -1 : 0);

    const double x_s = observed.values[s];
    const double x_i = observed.values[seg.inflection];
    const double x_e = observed.values[e];
    seg.start_rate = (x_i - x_s) / static_cast<double>(seg.inflection - s + 1);
    seg.end_rate = (x_e - x_i) / static_cast<double>(e - seg.inflection + 1);
    out.push_back(seg);
  }
  return out;
}

std::string phase_name(Phase p) {
  switch (p) {
    case Phase::baseline: return "baseline";
    case Phase::change: return "change";
    case Phase::continuing_recovery: return "continuing_recovery";
    case Phase::full_recovery: return "full_recovery";
  }
  throw DomainError("invalid phase");
}

Phase phase_from_string(const std::string& s) {
  if (s == "baseline") return Phase::baseline;
  if (s == "change") return Phase::change;
  if (s == "continuing_recovery") return Phase::continuing_recovery;
  if (s == "full_recovery") return Phase::full_recovery;
  throw ParseError("unknown phase '" + s + "'");
}

std::vector<Phase> phase_labels(const NtlSeries& observed, const std::vector<Segment>& segs,
                                double baseline_median, double recovery_band) {
  const std::size_t n = observed.size();
  std::vector<Phase> phases(n, Phase::baseline);
  const double band = recovery_band * std::abs(baseline_median);
  for (std::size_t si = 0; si < segs.size(); ++si) {
    const Segment& seg = segs[si];
    const std::size_t stop = si + 1 < segs.size() ? segs[si + 1].start : n;
    for (std::size_t t = seg.start; t <= seg.inflection && t < n; ++t) {
      phases[t] = Phase::change;
    }
    bool recovered = false;
    for (std::size_t t = seg.inflection + 1; t < stop; ++t) {
      if (!recovered && !observed.gap_mask[t] &&
          std::abs(observed.values[t] - baseline_median) <= band) {
        recovered = true;
      }
      phases[t] = recovered ? Phase::full_recovery : Phase::continuing_recovery;
    }
  }
  return phases;
}

std::vector<int> member_confidence(const NtlSeries& slice, const EnsembleForecast& ens,
                                   const DetectConfig& cfg, std::size_t input_window) {
  validate(cfg);
  if (slice.size() <= input_window) {
    throw InsufficientDataError("confidence: no monitored steps in the slice");
  }
  const std::size_t n_mon = slice.size() - input_window;
  std::vector<int> conf(n_mon, 0);
  for (const ModelForecast& m : ens.members) {
    if (m.prediction.size() != slice.size() || !(m.start_date == slice.start_date)) {
      throw AlignmentError("confidence: member forecast span mismatch");
    }
    ResidualSeries mr;
    mr.start_date = slice.date_at(input_window);
    mr.r.assign(n_mon, std::nullopt);
    for (std::size_t t = input_window; t < slice.size(); ++t) {
      if (slice.gap_mask[t] || !m.prediction[t].has_value()) continue;
      mr.r[t - input_window] = slice.values[t] - *m.prediction[t];
    }
    const ThresholdResult th =
        cfg.tau_mode == TauMode::batch
            ? threshold(mr, cfg.t_percent)
            : threshold_streaming(mr, cfg.t_percent, cfg.streaming_window,
                                  cfg.streaming_min_history);
    for (std::size_t t = 0; t < n_mon; ++t) {
      if (th.flagged[t]) ++conf[t];
    }
  }
  return conf;
}

ChangeReport detect_changes(const std::string& zone_id, const NtlSeries& slice,
                            const EnsembleForecast& ens, double baseline_median,
                            const DetectConfig& cfg, std::size_t input_window) {
  validate(cfg);
  if (slice.size() <= input_window) {
    throw InsufficientDataError("detect: slice has no monitored steps beyond the input window");
  }
  const ResidualSeries full = residuals(slice, ens);
  const std::size_t n_mon = slice.size() - input_window;

  ChangeReport rep;
  rep.zone_id = zone_id;
  rep.start_date = slice.date_at(input_window);
  rep.baseline_median = baseline_median;
  rep.config = cfg;

  NtlSeries mon_obs;
  mon_obs.zone_id = zone_id;
  mon_obs.start_date = rep.start_date;
  mon_obs.values.assign(slice.values.begin() + input_window, slice.values.end());
  mon_obs.gap_mask.assign(slice.gap_mask.begin() + input_window, slice.gap_mask.end());

  ResidualSeries mon;
  mon.start_date = rep.start_date;
  mon.r.assign(full.r.begin() + input_window, full.r.end());

  const ThresholdResult th =
      cfg.tau_mode == TauMode::batch
          ? threshold(mon, cfg.t_percent)
          : threshold_streaming(mon, cfg.t_percent, cfg.streaming_window,
                                cfg.streaming_min_history);
  rep.tau = cfg.tau_mode == TauMode::batch ? th.tau : 0.0;
  rep.flagged = th.flagged;
  rep.segs = segments(mon, mon_obs, th.flagged, cfg);
  rep.phase = phase_labels(mon_obs, rep.segs, baseline_median, cfg.recovery_band);
  rep.confidence = member_confidence(slice, ens, cfg, input_window);

  rep.observed.assign(n_mon, std::nullopt);
  rep.ensemble.assign(n_mon, std::nullopt);
  rep.r = mon.r;
  for (std::size_t t = 0; t < n_mon; ++t) {
    if (!mon_obs.gap_mask[t]) rep.observed[t] = mon_obs.values[t];
    if (ens.prediction[input_window + t].has_value()) {
      rep.ensemble[t] = *ens.prediction[input_window + t];
    }
  }
  return rep;
}

namespace {

json opt_to_json(const std::optional<double>& v) {
  if (v.has_value()) return *v;
  return nullptr;
}

std::optional<double> opt_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::string change_report_to_json(const ChangeReport& report) {
  json j;
  j["format"] = "ntlchange-change-report";
  j["format_version"] = 1;
  j["zone_id"] = report.zone_id;
  j["start_date"] = report.start_date.to_string();
  j["baseline_median"] = report.baseline_median;
  j["detector"] = {{"t_percent", report.config.t_percent},
                   {"tau_mode", tau_mode_name(report.config.tau_mode)},
                   {"streaming_window", report.config.streaming_window},
                   {"streaming_min_history", report.config.streaming_min_history},
                   {"min_persistence", report.config.min_persistence},
                   {"gap_tolerance", report.config.gap_tolerance},
                   {"recovery_band", report.config.recovery_band}};
  if (report.config.tau_mode == TauMode::batch) {
    j["tau"] = report.tau;
  } else {
    j["tau"] = nullptr;
  }
  json steps = json::array();
  for (std::size_t t = 0; t < report.size(); ++t) {
    steps.push_back({{"date", (report.start_date + static_cast<std::int64_t>(t)).to_string()},
                     {"observed", opt_to_json(report.observed[t])},
                     {"ensemble", opt_to_json(report.ensemble[t])},
                     {"r", opt_to_json(report.r[t])},
                     {"flagged", static_cast<bool>(report.flagged[t])},
                     {"phase", phase_name(report.phase[t])},
                     {"confidence", report.confidence[t]}});
  }
  j["steps"] = std::move(steps);
  json segs = json::array();
  for (const Segment& s : report.segs) {
    segs.push_back(
        {{"start", (report.start_date + static_cast<std::int64_t>(s.start)).to_string()},
         {"inflection",
          (report.start_date + static_cast<std::int64_t>(s.inflection)).to_string()},
         {"end", (report.start_date + static_cast<std::int64_t>(s.end)).to_string()},
         {"open_ended", s.open_ended},
         {"start_rate", s.start_rate},
         {"end_rate", s.end_rate},
         {"mean_severity", s.mean_severity},
         {"direction", s.direction}});
  }
  j["segments"] = std::move(segs);
  return j.dump(2) + "\n";
}

ChangeReport change_report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "ntlchange-change-report") {
      throw ParseError("change report: unrecognized format tag");
    }
    if (j.at("format_version").get<int>() != 1) {
      throw ParseError("change report: unsupported format version");
    }
    ChangeReport rep;
    rep.zone_id = j.at("zone_id").get<std::string>();
    rep.start_date = Date::parse(j.at("start_date").get<std::string>());
    rep.baseline_median = j.at("baseline_median").get<double>();
    const json& d = j.at("detector");
    rep.config.t_percent = d.at("t_percent").get<double>();
    rep.config.tau_mode = tau_mode_from_string(d.at("tau_mode").get<std::string>());
    rep.config.streaming_window = d.at("streaming_window").get<std::size_t>();
    rep.config.streaming_min_history = d.at("streaming_min_history").get<std::size_t>();
    rep.config.min_persistence = d.at("min_persistence").get<std::size_t>();
    rep.config.gap_tolerance = d.at("gap_tolerance").get<std::size_t>();
    rep.config.recovery_band = d.at("recovery_band").get<double>();
    rep.tau = j.at("tau").is_null() ? 0.0 : j.at("tau").get<double>();

    for (const json& st : j.at("steps")) {
      const Date date = Date::parse(st.at("date").get<std::string>());
      const std::size_t t = rep.observed.size();
      if (!(date == rep.start_date + static_cast<std::int64_t>(t))) {
        throw ParseError("change report: step dates are not consecutive");
      }
      rep.observed.push_back(opt_from_json(st.at("observed")));
      rep.ensemble.push_back(opt_from_json(st.at("ensemble")));
      rep.r.push_back(opt_from_json(st.at("r")));
      rep.flagged.push_back(st.at("flagged").get<bool>());
      rep.phase.push_back(phase_from_string(st.at("phase").get<std::string>()));
      rep.confidence.push_back(st.at("confidence").get<int>());
    }
    for (const json& sj : j.at("segments")) {
      Segment s;
      auto index_of = [&](const char* key) {
        const Date dte = Date::parse(sj.at(key).get<std::string>());
        const std::int64_t off = dte - rep.start_date;
        if (off < 0 || static_cast<std::size_t>(off) >= rep.size()) {
          throw ParseError("change report: segment date outside the monitored span");
        }
        return static_cast<std::size_t>(off);
      };
      s.start = index_of("start");
      s.inflection = index_of("inflection");
      s.end = index_of("end");
      s.open_ended = sj.at("open_ended").get<bool>();
      s.start_rate = sj.at("start_rate").get<double>();
      s.end_rate = sj.at("end_rate").get<double>();
      s.mean_severity = sj.at("mean_severity").get<double>();
      s.direction = sj.at("direction").get<int>();
      rep.segs.push_back(s);
    }
    return rep;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("change report: ") + e.what());
  }
}

}  // namespace ntlc
