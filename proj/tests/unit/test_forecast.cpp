#include <filesystem>
#include <optional>
#include <vector>

#include "doctest.h"
#include "ntlc/csvio.hpp"
#include "ntlc/date.hpp"
#include "ntlc/errors.hpp"
#include "ntlc/forecast.hpp"
#include "ntlc/model.hpp"
#include "ntlc/series.hpp"

using namespace ntlc;
namespace fs = std::filesystem;

namespace {

NtlSeries constant_series(std::size_t n, double v) {
  NtlSeries s;
  s.zone_id = "z";
  s.start_date = Date(2020, 1, 1);
  s.values.assign(n, v);
  s.gap_mask.assign(n, false);
  return s;
}

// A model that predicts exactly 30 everywhere: trained on constant data, the
// normalized problem is all-zero, so every gradient vanishes and the output
// layer keeps its zero bias.
TrainedModel constant_model(std::size_t w_i = 4, std::size_t w_o = 2) {
  TrainConfig cfg;
  cfg.input_window = w_i;
  cfg.output_window = w_o;
  cfg.epochs_fcnn = 1;
  const NtlSeries s = constant_series(20, 30.0);
  return train_model(Architecture::fcnn, make_windows(s, w_i, w_o), cfg);
}

ModelForecast stub_member(Architecture a, const Date& start, std::size_t n,
                          std::size_t defined_from, double value, int coverage) {
  ModelForecast m;
  m.architecture = a;
  m.start_date = start;
  m.prediction.assign(n, std::nullopt);
  m.coverage.assign(n, 0);
  for (std::size_t t = defined_from; t < n; ++t) {
    m.prediction[t] = value;
    m.coverage[t] = coverage;
  }
  return m;
}

}  // namespace

TEST_CASE("median") {
  CHECK(median({5.0}) == 5.0);
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  CHECK(median({-1.0, -1.0, 7.0}) == -1.0);
  CHECK_THROWS_AS(median({}), InsufficientDataError);
}

TEST_CASE("ensemble weight helpers") {
  EnsembleWeights w;
  CHECK(weight_for(w, Architecture::fcnn) == 0.3);
  CHECK(weight_for(w, Architecture::cnn) == 0.2);
  CHECK(weight_for(w, Architecture::lstm) == 0.5);
  CHECK_NOTHROW(validate(w));
  w.cnn = -0.1;
  CHECK_THROWS_AS(validate(w), ConfigError);
  w = EnsembleWeights{0.0, 0.0, 0.0};
  CHECK_THROWS_AS(validate(w), ConfigError);
}

TEST_CASE("sliding forecast coverage counts the covering windows") {
  TrainedModel model = constant_model();
  const NtlSeries s = constant_series(10, 30.0);
  const ModelForecast f = sliding_forecast(model, s);
  REQUIRE(f.prediction.size() == 10);
  const std::vector<int> expected_cov = {0, 0, 0, 0, 1, 2, 2, 2, 2, 2};
  for (std::size_t t = 0; t < 10; ++t) {
    CHECK(f.coverage[t] == expected_cov[t]);
    CHECK(f.prediction[t].has_value() == (expected_cov[t] > 0));
    if (f.prediction[t]) CHECK(*f.prediction[t] == 30.0);
  }
  CHECK(f.start_date == s.start_date);
  CHECK(f.architecture == Architecture::fcnn);
}

TEST_CASE("sliding forecast skips windows that touch masked days") {
  TrainedModel model = constant_model();
  NtlSeries s = constant_series(12, 30.0);
  s.gap_mask[5] = true;
  s.values[5] = 999.0;  // must never enter an input window

  const ModelForecast f = sliding_forecast(model, s);
  const std::vector<int> expected_cov = {0, 0, 0, 0, 1, 2, 1, 0, 0, 0, 1, 2};
  for (std::size_t t = 0; t < 12; ++t) {
    CHECK(f.coverage[t] == expected_cov[t]);
    CHECK(f.prediction[t].has_value() == (expected_cov[t] > 0));
    // A masked observation can still have a prediction (t = 5), and the
    // poisoned value never leaks into any forecast.
    if (f.prediction[t]) CHECK(*f.prediction[t] == 30.0);
  }
}

TEST_CASE("sliding forecast needs more days than the input window") {
  TrainedModel model = constant_model();
  CHECK_THROWS_AS(sliding_forecast(model, constant_series(4, 30.0)), InsufficientDataError);
  CHECK_NOTHROW(sliding_forecast(model, constant_series(5, 30.0)));
}

TEST_CASE("ensemble combines members with fixed weights") {
  const Date start(2020, 1, 1);
  std::vector<ModelForecast> members;
  members.push_back(stub_member(Architecture::fcnn, start, 6, 2, 10.0, 1));
  members.push_back(stub_member(Architecture::cnn, start, 6, 2, 20.0, 1));
  members.push_back(stub_member(Architecture::lstm, start, 6, 2, 40.0, 1));

  const EnsembleForecast ens = ensemble(members, EnsembleWeights{});
  CHECK(ens.weights.fcnn == doctest::Approx(0.3));
  CHECK(ens.weights.cnn == doctest::Approx(0.2));
  CHECK(ens.weights.lstm == doctest::Approx(0.5));
  for (std::size_t t = 0; t < 6; ++t) {
    CHECK(ens.prediction[t].has_value() == (t >= 2));
    if (ens.prediction[t]) CHECK(*ens.prediction[t] == doctest::Approx(27.0).epsilon(1e-14));
  }
  CHECK(ens.members.size() == 3);
}

TEST_CASE("ensemble renormalizes over the present members") {
  const Date start(2020, 1, 1);
  std::vector<ModelForecast> members;
  members.push_back(stub_member(Architecture::fcnn, start, 4, 1, 10.0, 1));
  members.push_back(stub_member(Architecture::cnn, start, 4, 1, 20.0, 1));

  const EnsembleForecast ens = ensemble(members, EnsembleWeights{});
  CHECK(ens.weights.fcnn == doctest::Approx(0.6));
  CHECK(ens.weights.cnn == doctest::Approx(0.4));
  CHECK(ens.weights.lstm == 0.0);
  REQUIRE(ens.prediction[1].has_value());
  CHECK(*ens.prediction[1] == doctest::Approx(14.0).epsilon(1e-14));

  const EnsembleForecast solo =
      ensemble({stub_member(Architecture::lstm, start, 4, 1, 33.0, 2)}, EnsembleWeights{});
  CHECK(solo.weights.lstm == doctest::Approx(1.0));
  CHECK(*solo.prediction[2] == doctest::Approx(33.0));
}

TEST_CASE("ensemble rejects inconsistent members") {
  const Date start(2020, 1, 1);

  CHECK_THROWS_AS(ensemble({}, EnsembleWeights{}), InsufficientDataError);

  // duplicate architecture
  CHECK_THROWS_AS(ensemble({stub_member(Architecture::fcnn, start, 4, 1, 1.0, 1),
                            stub_member(Architecture::fcnn, start, 4, 1, 2.0, 1)},
                           EnsembleWeights{}),
                  AlignmentError);

  // mismatched spans
  CHECK_THROWS_AS(ensemble({stub_member(Architecture::fcnn, start, 4, 1, 1.0, 1),
                            stub_member(Architecture::cnn, start, 5, 1, 2.0, 1)},
                           EnsembleWeights{}),
                  AlignmentError);
  CHECK_THROWS_AS(ensemble({stub_member(Architecture::fcnn, start, 4, 1, 1.0, 1),
                            stub_member(Architecture::cnn, start + 1, 4, 1, 2.0, 1)},
                           EnsembleWeights{}),
                  AlignmentError);

  // defined-step disagreement
  CHECK_THROWS_AS(ensemble({stub_member(Architecture::fcnn, start, 4, 1, 1.0, 1),
                            stub_member(Architecture::cnn, start, 4, 2, 2.0, 1)},
                           EnsembleWeights{}),
                  AlignmentError);

  // all present members carry zero weight
  CHECK_THROWS_AS(ensemble({stub_member(Architecture::fcnn, start, 4, 1, 1.0, 1)},
                           EnsembleWeights{0.0, 0.2, 0.8}),
                  ConfigError);
}

TEST_CASE("forecast csv golden output") {
  NtlSeries s = constant_series(7, 0.0);
  s.values = {10, 11, 12, 13.5, 14, 15, 16};
  s.gap_mask[4] = true;

  std::vector<ModelForecast> members;
  members.push_back(stub_member(Architecture::fcnn, s.start_date, 7, 2, 1.5, 2));
  members.push_back(stub_member(Architecture::lstm, s.start_date, 7, 2, 2.5, 1));
  const EnsembleForecast ens = ensemble(members, EnsembleWeights{});

  const fs::path p = fs::temp_directory_path() / "ntlc_forecast_tests" / "forecast.csv";
  write_forecast_csv(p.string(), s, ens, 2);

  CHECK(read_file(p) ==
        "date,observed,fcnn,cnn,lstm,ensemble,coverage\n"
        "2020-01-03,12,1.5,,2.5,2.125,2\n"
        "2020-01-04,13.5,1.5,,2.5,2.125,2\n"
        "2020-01-05,,1.5,,2.5,2.125,2\n"
        "2020-01-06,15,1.5,,2.5,2.125,2\n"
        "2020-01-07,16,1.5,,2.5,2.125,2\n");

  // Exporting against a series with a different span is refused.
  const NtlSeries other = constant_series(9, 1.0);
  CHECK_THROWS_AS(write_forecast_csv(p.string(), other, ens, 0), AlignmentError);
}
