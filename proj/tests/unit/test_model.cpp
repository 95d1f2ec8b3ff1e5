#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "ntlc/csvio.hpp"
#include "ntlc/date.hpp"
#include "ntlc/errors.hpp"
#include "ntlc/model.hpp"
#include "ntlc/series.hpp"

using namespace ntlc;

namespace {

NtlSeries series_of(std::vector<double> values, std::vector<bool> gaps) {
  NtlSeries s;
  s.zone_id = "z";
  s.start_date = Date(2015, 1, 1);
  s.values = std::move(values);
  s.gap_mask = std::move(gaps);
  return s;
}

NtlSeries constant_series(std::size_t n, double v) {
  return series_of(std::vector<double>(n, v), std::vector<bool>(n, false));
}

}  // namespace

TEST_CASE("architecture names round trip") {
  for (Architecture a : kAllArchitectures) {
    CHECK(architecture_from_string(architecture_name(a)) == a);
  }
  CHECK(architecture_name(Architecture::fcnn) == "fcnn");
  CHECK(architecture_name(Architecture::cnn) == "cnn");
  CHECK(architecture_name(Architecture::lstm) == "lstm");
  CHECK_THROWS_AS(architecture_from_string("mlp"), ParseError);
}

TEST_CASE("config validation and per-architecture epochs") {
  TrainConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  CHECK(epochs_for(cfg, Architecture::fcnn) == 70);
  CHECK(epochs_for(cfg, Architecture::cnn) == 90);
  CHECK(epochs_for(cfg, Architecture::lstm) == 25);

  cfg.output_window = cfg.input_window;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.output_window = 0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.split_fraction = 1.0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.epochs_cnn = 0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.dropout_rate = 1.0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.max_norm = 0.0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.activity_coeff = -1e-9;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
}

TEST_CASE("model seeds are deterministic and distinct per architecture") {
  std::set<std::uint64_t> seeds;
  for (Architecture a : kAllArchitectures) {
    CHECK(model_seed(123, a) == model_seed(123, a));
    seeds.insert(model_seed(123, a));
    CHECK(model_seed(123, a) != model_seed(124, a));
  }
  CHECK(seeds.size() == 3);
}

TEST_CASE("make_windows skips masked spans") {
  const NtlSeries s = series_of({10, 11, 12, 0, 14, 15, 16},
                                {false, false, false, true, false, false, false});
  const auto pairs = make_windows(s, 2, 1);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].start == 0);
  CHECK(pairs[0].input == std::vector<double>{10, 11});
  CHECK(pairs[0].target == std::vector<double>{12});
  CHECK(pairs[1].start == 4);
  CHECK(pairs[1].input == std::vector<double>{14, 15});
  CHECK(pairs[1].target == std::vector<double>{16});
}

TEST_CASE("make_windows on a clean series is exhaustive and ordered") {
  const NtlSeries s = constant_series(10, 5.0);
  const auto pairs = make_windows(s, 4, 2);
  REQUIRE(pairs.size() == 5);  // starts 0..4
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(pairs[i].start == i);
    CHECK(pairs[i].input.size() == 4);
    CHECK(pairs[i].target.size() == 2);
  }
  CHECK(make_windows(s, 9, 1).size() == 1);
  CHECK_THROWS_AS(make_windows(s, 10, 1), InsufficientDataError);
}

TEST_CASE("build_architecture output shapes") {
  for (Architecture a : kAllArchitectures) {
    Network net = build_architecture(a, 60, 30, 0.1);
    net.init(1);
    Tensor x = a == Architecture::fcnn ? Tensor({2, 60}) : Tensor({2, 60, 1});
    for (std::size_t i = 0; i < x.numel(); ++i) x[i] = 0.01 * static_cast<double>(i % 7);
    const Tensor y = net.forward(x, RunMode::infer);
    REQUIRE(y.rank() == 2);
    CHECK(y.dim(0) == 2);
    CHECK(y.dim(1) == 30);
    CHECK(y.all_finite());
  }
  CHECK_THROWS_AS(build_architecture(Architecture::cnn, 2, 1, 0.1), ConfigError);
}

TEST_CASE("training on a constant series is exact") {
  const NtlSeries s = constant_series(40, 30.0);
  const auto pairs = make_windows(s, 8, 4);
  TrainConfig cfg;
  cfg.input_window = 8;
  cfg.output_window = 4;
  cfg.epochs_fcnn = 3;
  cfg.epochs_cnn = 2;
  cfg.epochs_lstm = 2;
  cfg.seed = 5;

  for (Architecture a : kAllArchitectures) {
    TrainedModel model = train_model(a, pairs, cfg);
    CHECK(model.architecture == a);
    CHECK(model.norm.mean == 30.0);
    CHECK(model.norm.scale == 1.0);  // constant data falls back to unit scale
    CHECK(model.final_val_mae() == 0.0);
    CHECK(model.final_train_mae() == 0.0);
    CHECK(model.history.size() == epochs_for(cfg, a));
    CHECK(model.seed == model_seed(5, a));

    Tensor x({1, 8});
    x.fill(30.0);
    const Tensor y = model.predict(x);
    REQUIRE(y.dim(1) == 4);
    for (std::size_t j = 0; j < 4; ++j) CHECK(y.at2(0, j) == 30.0);
  }
}

TEST_CASE("gradient_update_samples counts epochs times training pairs") {
  const NtlSeries s = constant_series(30, 12.0);
  const auto pairs = make_windows(s, 6, 2);  // 23 pairs
  REQUIRE(pairs.size() == 23);
  TrainConfig cfg;
  cfg.input_window = 6;
  cfg.output_window = 2;
  cfg.epochs_fcnn = 4;
  cfg.batch_size = 5;
  // floor(0.8 * 23) = 18 training pairs
  const TrainedModel model = train_model(Architecture::fcnn, pairs, cfg);
  CHECK(model.gradient_update_samples == 4u * 18u);
}

TEST_CASE("training is deterministic in the seed") {
  NtlSeries s = constant_series(60, 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s.values[i] = 20.0 + 5.0 * std::sin(0.3 * static_cast<double>(i)) +
                  0.2 * static_cast<double>(i % 5);
  }
  const auto pairs = make_windows(s, 10, 3);
  TrainConfig cfg;
  cfg.input_window = 10;
  cfg.output_window = 3;
  cfg.epochs_fcnn = 2;
  cfg.seed = 99;

  TrainedModel a = train_model(Architecture::fcnn, pairs, cfg);
  TrainedModel b = train_model(Architecture::fcnn, pairs, cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    CHECK(a.history[e].train_mae == b.history[e].train_mae);
    CHECK(a.history[e].val_mae == b.history[e].val_mae);
  }
  Tensor x({1, 10});
  for (std::size_t i = 0; i < 10; ++i) x[i] = s.values[i];
  const Tensor ya = a.predict(x);
  const Tensor yb = b.predict(x);
  for (std::size_t i = 0; i < ya.numel(); ++i) CHECK(ya[i] == yb[i]);

  cfg.seed = 100;
  TrainedModel c = train_model(Architecture::fcnn, pairs, cfg);
  const Tensor yc = c.predict(x);
  bool differs = false;
  for (std::size_t i = 0; i < ya.numel(); ++i) {
    if (ya[i] != yc[i]) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("train_model rejects unusable inputs") {
  TrainConfig cfg;
  cfg.input_window = 6;
  cfg.output_window = 2;
  CHECK_THROWS_AS(train_model(Architecture::fcnn, {}, cfg), InsufficientDataError);

  // One pair cannot provide both splits.
  const NtlSeries tiny = constant_series(8, 1.0);
  const auto one = make_windows(tiny, 6, 2);
  REQUIRE(one.size() == 1);
  CHECK_THROWS_AS(train_model(Architecture::fcnn, one, cfg), InsufficientDataError);

  // Pair geometry must match the configuration.
  const auto wrong = make_windows(constant_series(20, 1.0), 5, 2);
  CHECK_THROWS_AS(train_model(Architecture::fcnn, wrong, cfg), ShapeError);
}

TEST_CASE("predict validates the input shape") {
  const auto pairs = make_windows(constant_series(30, 2.0), 6, 2);
  TrainConfig cfg;
  cfg.input_window = 6;
  cfg.output_window = 2;
  cfg.epochs_fcnn = 1;
  TrainedModel model = train_model(Architecture::fcnn, pairs, cfg);
  CHECK_THROWS_AS(model.predict(Tensor({1, 7})), ShapeError);
  CHECK_THROWS_AS(model.predict(Tensor({6})), ShapeError);
}

TEST_CASE("training log format") {
  namespace fs = std::filesystem;
  const fs::path p = fs::temp_directory_path() / "ntlc_model_tests" / "log.csv";
  std::vector<EpochStats> history(2);
  history[0] = {1.5, 2.25};
  history[1] = {0.75, 1.125};
  write_training_log(p.string(), history);
  CHECK(read_file(p) ==
        "epoch,train_mae,val_mae\n"
        "1,1.5,2.25\n"
        "2,0.75,1.125\n");
}
