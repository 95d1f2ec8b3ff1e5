#include "ntlc/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ntlc/csvio.hpp"
#include "ntlc/errors.hpp"

namespace ntlc {

void validate(const EnsembleWeights& w) {
  if (w.fcnn < 0.0 || w.cnn < 0.0 || w.lstm < 0.0) {
    throw ConfigError("ensemble weights must be non-negative");
  }
  if (!(w.fcnn + w.cnn + w.lstm > 0.0)) {
    throw ConfigError("ensemble weights must not all be zero");
  }
}

double weight_for(const EnsembleWeights& w, Architecture a) {
  switch (a) {
    case Architecture::fcnn: return w.fcnn;
    case Architecture::cnn: return w.cnn;
    case Architecture::lstm: return w.lstm;
  }
  throw DomainError("invalid architecture");
}

double median(std::vector<double> values) {
  if (values.empty()) throw InsufficientDataError("median of no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

ModelForecast sliding_forecast(TrainedModel& model, const NtlSeries& series) {
  const std::size_t w_i = model.config.input_window;
  const std::size_t w_o = model.config.output_window;
  const std::size_t n = series.size();
  if (n < w_i + 1) {
    throw InsufficientDataError("series has " + std::to_string(n) +
                                " days, need more than the input window (" +
                                std::to_string(w_i) + ") to forecast anything");
  }

  // Valid window starts: the input span is gap-free and at least one
  // predicted step lands inside the series.
  std::vector<std::size_t> starts;
  {
    std::size_t gap_free = 0;  // trailing run of unmasked days ending at t
    for (std::size_t t = 0; t < n; ++t) {
      gap_free = series.gap_mask[t] ? 0 : gap_free + 1;
      if (t + 1 >= w_i && gap_free >= w_i && t + 1 < n) starts.push_back(t + 1 - w_i);
    }
  }

  ModelForecast out;
  out.architecture = model.architecture;
  out.start_date = series.start_date;
  out.prediction.assign(n, std::nullopt);
  out.coverage.assign(n, 0);

  std::vector<std::vector<double>> buckets(n);
  constexpr std::size_t kPredictChunk = 256;
  for (std::size_t lo = 0; lo < starts.size(); lo += kPredictChunk) {
    const std::size_t hi = std::min(lo + kPredictChunk, starts.size());
    Tensor x({hi - lo, w_i});
    for (std::size_t r = 0; r < hi - lo; ++r) {
      const std::size_t s = starts[lo + r];
      std::copy_n(series.values.begin() + s, w_i, x.data() + r * w_i);
    }
    Tensor y = model.predict(x);
    for (std::size_t r = 0; r < hi - lo; ++r) {
      const std::size_t s = starts[lo + r];
      for (std::size_t k = 0; k < w_o; ++k) {
        const std::size_t t = s + w_i + k;
        if (t >= n) break;
        buckets[t].push_back(y.at2(r, k));
      }
    }
  }

  for (std::size_t t = 0; t < n; ++t) {
    if (buckets[t].empty()) continue;
    out.coverage[t] = static_cast<int>(buckets[t].size());
    out.prediction[t] = median(std::move(buckets[t]));
  }
  return out;
}

EnsembleForecast ensemble(std::vector<ModelForecast> members, const EnsembleWeights& weights) {
  if (members.empty()) throw InsufficientDataError("ensemble of no member forecasts");
  validate(weights);
  for (std::size_t i = 1; i < members.size(); ++i) {
    if (!(members[i].start_date == members[0].start_date) ||
        members[i].prediction.size() != members[0].prediction.size()) {
      throw AlignmentError("member forecasts cover different time spans");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (members[i].architecture == members[j].architecture) {
        throw AlignmentError("duplicate member architecture in ensemble");
      }
    }
  }
  const std::size_t n = members[0].prediction.size();
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t i = 1; i < members.size(); ++i) {
      if (members[i].prediction[t].has_value() != members[0].prediction[t].has_value()) {
        throw AlignmentError("member forecasts disagree on defined steps");
      }
    }
  }

  double wsum = 0.0;
  for (const ModelForecast& m : members) wsum += weight_for(weights, m.architecture);
  if (!(wsum > 0.0)) {
    throw ConfigError("ensemble weights for the present members must not all be zero");
  }

  EnsembleForecast out;
  out.start_date = members[0].start_date;
  out.weights.fcnn = 0.0;
  out.weights.cnn = 0.0;
  out.weights.lstm = 0.0;
  for (const ModelForecast& m : members) {
    const double w = weight_for(weights, m.architecture) / wsum;
    switch (m.architecture) {
      case Architecture::fcnn: out.weights.fcnn = w; break;
      case Architecture::cnn: out.weights.cnn = w; break;
      case Architecture::lstm: out.weights.lstm = w; break;
    }
  }
  out.prediction.assign(n, std::nullopt);
  for (std::size_t t = 0; t < n; ++t) {
    if (!members[0].prediction[t].has_value()) continue;
    double acc = 0.0;
    for (const ModelForecast& m : members) {
      acc += weight_for(out.weights, m.architecture) * *m.prediction[t];
    }
    out.prediction[t] = acc;
  }
  out.members = std::move(members);
  return out;
}

namespace {

void append_cell(std::string& line, const std::optional<double>& v) {
  line += ',';
  if (v.has_value()) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", *v);
    line += buf;
  }
}

}  // namespace

void write_forecast_csv(const std::string& path, const NtlSeries& series,
                        const EnsembleForecast& ens, std::size_t first_index) {
  if (!(series.start_date == ens.start_date) || series.size() != ens.prediction.size()) {
    throw AlignmentError("forecast export: series/ensemble span mismatch");
  }
  const ModelForecast* by_arch[3] = {nullptr, nullptr, nullptr};
  for (const ModelForecast& m : ens.members) {
    by_arch[static_cast<int>(m.architecture)] = &m;
  }
  std::string out = "date,observed,fcnn,cnn,lstm,ensemble,coverage\n";
  for (std::size_t t = first_index; t < series.size(); ++t) {
    std::string line = series.date_at(t).to_string();
    append_cell(line, series.gap_mask[t] ? std::nullopt
                                         : std::optional<double>(series.values[t]));
    int coverage = 0;
    for (int a = 0; a < 3; ++a) {
      if (by_arch[a]) {
        append_cell(line, by_arch[a]->prediction[t]);
        coverage = std::max(coverage, by_arch[a]->coverage[t]);
      } else {
        line += ',';
      }
    }
    append_cell(line, ens.prediction[t]);
    line += ',' + std::to_string(coverage) + '\n';
    out += line;
  }
  write_file_atomic(path, out);
}

}  // namespace ntlc
