#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ntlc/date.hpp"
#include "ntlc/model.hpp"
#include "ntlc/series.hpp"

namespace ntlc {

/// Per-step forecast of one model over a series. Arrays are aligned with the
/// series indices: entries before w_i, and steps all of whose covering input
/// windows touch a masked day, are absent with coverage 0.
struct ModelForecast {
  Architecture architecture = Architecture::fcnn;
  Date start_date;
  std::vector<std::optional<double>> prediction;
  std::vector<int> coverage;
};

struct EnsembleWeights {
  double fcnn = 0.3;
  double cnn = 0.2;
  double lstm = 0.5;
};

void validate(const EnsembleWeights& w);
double weight_for(const EnsembleWeights& w, Architecture a);

struct EnsembleForecast {
  EnsembleWeights weights;  // normalized over the members actually present
  Date start_date;
  std::vector<std::optional<double>> prediction;
  std::vector<ModelForecast> members;
};

/// Median of the given values; the midpoint of the two central order
/// statistics for even counts. Input order is irrelevant.
double median(std::vector<double> values);

/// Slides the model over the series with stride 1: every alignment whose
/// input window is gap-free contributes w_o forward predictions, and each
/// step's final prediction is the median over the windows covering it.
/// Inputs are always true observations (open loop).
ModelForecast sliding_forecast(TrainedModel& model, const NtlSeries& series);

/// Convex combination of member forecasts. Members must share the time axis
/// and defined-step set; weights are renormalized over the present members.
EnsembleForecast ensemble(std::vector<ModelForecast> members, const EnsembleWeights& weights);

/// CSV export `date,observed,fcnn,cnn,lstm,ensemble,coverage` over the given
/// index range of the series; absent values are empty cells.
void write_forecast_csv(const std::string& path, const NtlSeries& series,
                        const EnsembleForecast& ens, std::size_t first_index);

}  // namespace ntlc
