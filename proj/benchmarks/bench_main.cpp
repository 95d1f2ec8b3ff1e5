#include <cstdint>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "ntlc/detect.hpp"
#include "ntlc/forecast.hpp"
#include "ntlc/layers.hpp"
#include "ntlc/model.hpp"
#include "ntlc/network.hpp"
#include "ntlc/synth.hpp"
#include "ntlc/tensor.hpp"

namespace {

ntlc::Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
  ntlc::Tensor t{std::move(shape)};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : t.flat()) v = u(rng);
  return t;
}

void bench_dense_forward(benchmark::State& state) {
  ntlc::DenseLayer layer(60, 60, ntlc::InitKind::he_uniform);
  std::mt19937_64 rng(1);
  layer.init_params(rng);
  const ntlc::Tensor x = random_tensor({64, 60}, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(layer.forward(x, ntlc::RunMode::infer));
  }
}
BENCHMARK(bench_dense_forward);

void bench_conv_forward(benchmark::State& state) {
  ntlc::Conv1dLayer layer(1, 90, 9, ntlc::Conv1dLayer::Padding::same, ntlc::InitKind::he_uniform);
  std::mt19937_64 rng(1);
  layer.init_params(rng);
  const ntlc::Tensor x = random_tensor({64, 60, 1}, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(layer.forward(x, ntlc::RunMode::infer));
  }
}
BENCHMARK(bench_conv_forward);

void bench_conv_backward(benchmark::State& state) {
  ntlc::Conv1dLayer layer(1, 90, 9, ntlc::Conv1dLayer::Padding::same, ntlc::InitKind::he_uniform);
  std::mt19937_64 rng(1);
  layer.init_params(rng);
  const ntlc::Tensor x = random_tensor({64, 60, 1}, 2);
  const ntlc::Tensor g = random_tensor({64, 60, 90}, 3);
  layer.forward(x, ntlc::RunMode::train);
  for (auto _ : state) {
    layer.zero_grads();
    benchmark::DoNotOptimize(layer.backward(g));
  }
}
BENCHMARK(bench_conv_backward);

void bench_lstm_forward(benchmark::State& state) {
  ntlc::LstmLayer layer(1, 45, true);
  std::mt19937_64 rng(1);
  layer.init_params(rng);
  const ntlc::Tensor x = random_tensor({64, 60, 1}, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(layer.forward(x, ntlc::RunMode::infer));
  }
}
BENCHMARK(bench_lstm_forward);

ntlc::ScenarioSpec bench_scenario() {
  ntlc::ScenarioSpec spec;
  spec.zone_id = "bench";
  spec.start_date = ntlc::Date(2016, 1, 1);
  spec.length_days = 4 * 365;
  spec.baseline = 30.0;
  spec.seasonal_amplitude = 3.0;
  spec.seed = 7;
  return spec;
}

void bench_sliding_forecast(benchmark::State& state) {
  const ntlc::SynthResult synth = ntlc::generate(bench_scenario());
  ntlc::TrainConfig cfg;
  cfg.epochs_fcnn = 1;
  const std::vector<ntlc::WindowPair> pairs =
      ntlc::make_windows(synth.series, cfg.input_window, cfg.output_window);
  ntlc::TrainedModel model = ntlc::train_model(ntlc::Architecture::fcnn, pairs, cfg);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ntlc::sliding_forecast(model, synth.series));
  }
}
BENCHMARK(bench_sliding_forecast);

void bench_threshold(benchmark::State& state) {
  ntlc::ResidualSeries res;
  res.start_date = ntlc::Date(2020, 1, 1);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  res.r.resize(2000);
  for (auto& v : res.r) v = n(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ntlc::threshold(res, 25.0));
  }
}
BENCHMARK(bench_threshold);

void bench_threshold_streaming(benchmark::State& state) {
  ntlc::ResidualSeries res;
  res.start_date = ntlc::Date(2020, 1, 1);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  res.r.resize(2000);
  for (auto& v : res.r) v = n(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ntlc::threshold_streaming(res, 25.0));
  }
}
BENCHMARK(bench_threshold_streaming);

}  // namespace

BENCHMARK_MAIN();
