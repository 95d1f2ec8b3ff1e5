#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ntlc/adam.hpp"
#include "ntlc/network.hpp"
#include "ntlc/series.hpp"
#include "ntlc/tensor.hpp"

namespace ntlc {

enum class Architecture { fcnn, cnn, lstm };

inline constexpr Architecture kAllArchitectures[] = {Architecture::fcnn, Architecture::cnn,
                                                     Architecture::lstm};

std::string architecture_name(Architecture a);
Architecture architecture_from_string(const std::string& s);

struct TrainConfig {
  std::size_t input_window = 60;
  std::size_t output_window = 30;
  double split_fraction = 0.8;
  std::size_t batch_size = 64;
  std::size_t epochs_fcnn = 70;
  std::size_t epochs_cnn = 90;
  std::size_t epochs_lstm = 25;
  AdamConfig adam;
  double dropout_rate = 0.1;
  bool max_norm_enabled = true;
  double max_norm = 3.0;
  bool activity_reg_enabled = true;
  double activity_coeff = 1e-6;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);
std::size_t epochs_for(const TrainConfig& cfg, Architecture a);

/// Deterministic per-architecture seed derived from the run seed, so the
/// three models draw independent parameter and dropout streams.
std::uint64_t model_seed(std::uint64_t run_seed, Architecture a);

/// One training example: w_i consecutive observed values and the w_o values
/// that follow them. start is the series index of the first input day.
struct WindowPair {
  std::size_t start = 0;
  std::vector<double> input;
  std::vector<double> target;
};

/// Enumerates stride-1 window pairs in chronological order, dropping any
/// alignment whose full span touches a masked day.
std::vector<WindowPair> make_windows(const NtlSeries& series, std::size_t w_i,
                                     std::size_t w_o);

struct NormStats {
  double mean = 0.0;
  double scale = 1.0;  // > 0; falls back to 1 for (near-)constant data
};

struct EpochStats {
  double train_mae = 0.0;  // original radiance units
  double val_mae = 0.0;
};

/// Builds the untrained layer stack for one architecture. Inputs are {N, w_i}
/// for the fully connected net and {N, w_i, 1} for the convolutional and
/// recurrent ones; every stack ends in a linear layer with w_o outputs.
Network build_architecture(Architecture a, std::size_t w_i, std::size_t w_o,
                           double dropout_rate = 0.1);

class TrainedModel {
 public:
  TrainedModel() = default;
  TrainedModel(TrainedModel&&) = default;
  TrainedModel& operator=(TrainedModel&&) = default;

  Architecture architecture = Architecture::fcnn;
  TrainConfig config;
  NormStats norm;
  Network net;
  std::vector<EpochStats> history;
  std::uint64_t seed = 0;  // per-model derived seed actually used
  // Instrumentation: number of training examples that contributed to a
  // gradient update; equals epochs * training pairs when the validation
  // split never leaks into training.
  std::uint64_t gradient_update_samples = 0;

  double final_train_mae() const { return history.empty() ? 0.0 : history.back().train_mae; }
  double final_val_mae() const { return history.empty() ? 0.0 : history.back().val_mae; }

  /// Maps raw (unnormalized) input windows {N, w_i} to raw predictions
  /// {N, w_o}, reshaping per architecture and running in infer mode.
  Tensor predict(const Tensor& raw_inputs);
};

/// Trains one architecture on the given pairs: chronological 80/20 split,
/// normalization from the training split, seeded shuffling, Adam on MAE.
TrainedModel train_model(Architecture a, const std::vector<WindowPair>& pairs,
                         const TrainConfig& cfg);

/// Training log as CSV `epoch,train_mae,val_mae` (1-based epochs).
void write_training_log(const std::string& path, const std::vector<EpochStats>& history);

}  // namespace ntlc
