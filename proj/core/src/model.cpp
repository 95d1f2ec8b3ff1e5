#include "ntlc/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "ntlc/csvio.hpp"
#include "ntlc/errors.hpp"

namespace ntlc {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Fisher-Yates with explicit draws so the permutation sequence is fully
// specified by the generator, not by library internals.
void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

struct CnnBlock {
  std::size_t filters, kernel;
  bool pool;
};

// Channel counts and kernel sizes are fixed; pooling only follows the first
// two blocks so a 60-day input keeps a non-empty length through the stack.
constexpr CnnBlock kCnnBlocks[] = {
    {90, 9, true}, {45, 9, true}, {30, 6, false}, {20, 6, false}};

std::size_t cnn_flatten_length(std::size_t w_i) {
  std::size_t len = w_i;
  for (const CnnBlock& blk : kCnnBlocks) {
    if (blk.pool) {
      if (len < 2) return 0;
      len = (len - 2) / 2 + 1;
    }
  }
  return len;
}

}  // namespace

std::string architecture_name(Architecture a) {
  switch (a) {
    case Architecture::fcnn: return "fcnn";
    case Architecture::cnn: return "cnn";
    case Architecture::lstm: return "lstm";
  }
  throw DomainError("invalid architecture");
}

Architecture architecture_from_string(const std::string& s) {
  if (s == "fcnn") return Architecture::fcnn;
  if (s == "cnn") return Architecture::cnn;
  if (s == "lstm") return Architecture::lstm;
  throw ParseError("unknown architecture '" + s + "' (expected fcnn, cnn or lstm)");
}

void validate(const TrainConfig& cfg) {
  if (cfg.output_window < 1 || cfg.output_window >= cfg.input_window) {
    throw ConfigError("window sizes must satisfy 1 <= output_window < input_window");
  }
  if (!(cfg.split_fraction > 0.0 && cfg.split_fraction < 1.0)) {
    throw ConfigError("split fraction must be in (0, 1)");
  }
  if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (cfg.epochs_fcnn < 1 || cfg.epochs_cnn < 1 || cfg.epochs_lstm < 1) {
    throw ConfigError("epoch counts must be >= 1");
  }
  if (cfg.dropout_rate < 0.0 || cfg.dropout_rate >= 1.0) {
    throw ConfigError("dropout rate must be in [0, 1)");
  }
  if (cfg.max_norm_enabled && !(cfg.max_norm > 0.0)) {
    throw ConfigError("max-norm cap must be > 0");
  }
  if (cfg.activity_reg_enabled && cfg.activity_coeff < 0.0) {
    throw ConfigError("activity regularizer coefficient must be >= 0");
  }
  validate(cfg.adam);
}

std::size_t epochs_for(const TrainConfig& cfg, Architecture a) {
  switch (a) {
    case Architecture::fcnn: return cfg.epochs_fcnn;
    case Architecture::cnn: return cfg.epochs_cnn;
    case Architecture::lstm: return cfg.epochs_lstm;
  }
  throw DomainError("invalid architecture");
}

std::uint64_t model_seed(std::uint64_t run_seed, Architecture a) {
  return splitmix64(run_seed ^ splitmix64(static_cast<std::uint64_t>(a) + 1));
}

std::vector<WindowPair> make_windows(const NtlSeries& series, std::size_t w_i,
                                     std::size_t w_o) {
  const std::size_t span = w_i + w_o;
  if (series.size() < span) {
    throw InsufficientDataError("series has " + std::to_string(series.size()) +
                                " days, need at least " + std::to_string(span) +
                                " for one window pair");
  }
  std::vector<WindowPair> pairs;
  for (std::size_t s = 0; s + span <= series.size(); ++s) {
    bool masked = false;
    for (std::size_t k = 0; k < span; ++k) {
      if (series.gap_mask[s + k]) {
        masked = true;
        break;
      }
    }
    if (masked) continue;
    WindowPair p;
    p.start = s;
    p.input.assign(series.values.begin() + s, series.values.begin() + s + w_i);
    p.target.assign(series.values.begin() + s + w_i, series.values.begin() + s + span);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

Network build_architecture(Architecture a, std::size_t w_i, std::size_t w_o,
                           double dropout_rate) {
  if (w_o < 1 || w_o >= w_i) {
    throw ConfigError("window sizes must satisfy 1 <= output_window < input_window");
  }
  Network net;
  switch (a) {
    case Architecture::fcnn: {
      const std::size_t hidden[] = {60, 45, 25};
      std::size_t in = w_i;
      for (std::size_t units : hidden) {
        net.add(std::make_unique<DenseLayer>(in, units, InitKind::he_uniform));
        net.add(std::make_unique<ReluLayer>(), true);
        net.add(std::make_unique<DropoutLayer>(dropout_rate));
        in = units;
      }
      net.add(std::make_unique<DenseLayer>(in, w_o, InitKind::glorot_uniform));
      break;
    }
    case Architecture::cnn: {
      const std::size_t flat_len = cnn_flatten_length(w_i);
      if (flat_len == 0) {
        throw ConfigError("input window " + std::to_string(w_i) +
                          " is too small for the convolutional stack");
      }
      std::size_t channels = 1;
      for (const CnnBlock& blk : kCnnBlocks) {
        net.add(std::make_unique<Conv1dLayer>(channels, blk.filters, blk.kernel,
                                              Conv1dLayer::Padding::same,
                                              InitKind::he_uniform));
        net.add(std::make_unique<ReluLayer>(), true);
        if (blk.pool) net.add(std::make_unique<MaxPool1dLayer>(2, 2));
        net.add(std::make_unique<BatchNormLayer>(blk.filters));
        net.add(std::make_unique<DropoutLayer>(dropout_rate));
        channels = blk.filters;
      }
      net.add(std::make_unique<FlattenLayer>());
      std::size_t in = flat_len * channels;
      for (std::size_t units : {std::size_t{20}, std::size_t{15}}) {
        net.add(std::make_unique<DenseLayer>(in, units, InitKind::he_uniform));
        net.add(std::make_unique<ReluLayer>(), true);
        in = units;
      }
      net.add(std::make_unique<DenseLayer>(in, w_o, InitKind::glorot_uniform));
      break;
    }
    case Architecture::lstm: {
      net.add(std::make_unique<LstmLayer>(1, 45, true), true);
      net.add(std::make_unique<DropoutLayer>(dropout_rate));
      net.add(std::make_unique<LstmLayer>(45, 30, false), true);
      net.add(std::make_unique<DropoutLayer>(dropout_rate));
      std::size_t in = 30;
      for (std::size_t units : {std::size_t{30}, std::size_t{15}}) {
        net.add(std::make_unique<DenseLayer>(in, units, InitKind::he_uniform));
        net.add(std::make_unique<ReluLayer>(), true);
        in = units;
      }
      net.add(std::make_unique<DenseLayer>(in, w_o, InitKind::glorot_uniform));
      break;
    }
  }
  return net;
}

namespace {

Tensor batch_inputs(Architecture a, const std::vector<double>& flat, std::size_t rows,
                    std::size_t w_i) {
  Tensor x = a == Architecture::fcnn ? Tensor({rows, w_i}) : Tensor({rows, w_i, 1});
  std::copy(flat.begin(), flat.begin() + rows * w_i, x.data());
  return x;
}

}  // namespace

Tensor TrainedModel::predict(const Tensor& raw_inputs) {
  if (raw_inputs.rank() != 2 || raw_inputs.dim(1) != config.input_window) {
    throw ShapeError("predict: expected {N, " + std::to_string(config.input_window) +
                     "} inputs, got " + raw_inputs.shape_string());
  }
  const std::size_t n = raw_inputs.dim(0);
  std::vector<double> flat(raw_inputs.data(), raw_inputs.data() + raw_inputs.numel());
  for (double& v : flat) v = (v - norm.mean) / norm.scale;
  Tensor x = batch_inputs(architecture, flat, n, config.input_window);
  Tensor y = net.forward(x, RunMode::infer);
  for (double& v : y.flat()) v = v * norm.scale + norm.mean;
  return y;
}

TrainedModel train_model(Architecture a, const std::vector<WindowPair>& pairs,
                         const TrainConfig& cfg) {
  validate(cfg);
  const std::size_t n = pairs.size();
  const std::size_t w_i = cfg.input_window, w_o = cfg.output_window;
  const std::size_t n_train = static_cast<std::size_t>(cfg.split_fraction *
                                                       static_cast<double>(n));
  if (n_train == 0 || n_train >= n) {
    throw InsufficientDataError("need both a training and a validation split, got " +
                                std::to_string(n) + " window pairs");
  }
  for (const WindowPair& p : pairs) {
    if (p.input.size() != w_i || p.target.size() != w_o) {
      throw ShapeError("window pair does not match the configured window sizes");
    }
  }

  // Normalization statistics come from the training split only (inputs and
  // targets pooled), and apply symmetrically to both.
  double sum = 0.0, sq = 0.0;
  const double count = static_cast<double>(n_train * (w_i + w_o));
  for (std::size_t i = 0; i < n_train; ++i) {
    for (double v : pairs[i].input) sum += v;
    for (double v : pairs[i].target) sum += v;
  }
  const double mean = sum / count;
  for (std::size_t i = 0; i < n_train; ++i) {
    for (double v : pairs[i].input) sq += (v - mean) * (v - mean);
    for (double v : pairs[i].target) sq += (v - mean) * (v - mean);
  }
  const double std_dev = std::sqrt(sq / count);

  TrainedModel model;
  model.architecture = a;
  model.config = cfg;
  model.norm.mean = mean;
  model.norm.scale = std_dev < 1e-12 ? 1.0 : std_dev;
  model.seed = model_seed(cfg.seed, a);
  model.net = build_architecture(a, w_i, w_o, cfg.dropout_rate);
  model.net.init(model.seed);

  std::vector<double> in_norm(n * w_i), tg_norm(n * w_o);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < w_i; ++k) {
      in_norm[i * w_i + k] = (pairs[i].input[k] - model.norm.mean) / model.norm.scale;
    }
    for (std::size_t k = 0; k < w_o; ++k) {
      tg_norm[i * w_o + k] = (pairs[i].target[k] - model.norm.mean) / model.norm.scale;
    }
  }

  Adam adam(cfg.adam, model.net.params());
  const std::size_t epochs = epochs_for(cfg, a);
  const double activity = cfg.activity_reg_enabled ? cfg.activity_coeff : 0.0;
  std::mt19937_64 shuffle_rng(splitmix64(model.seed ^ 0xC0FFEEull));
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<double> batch_in, batch_tg;
  auto gather = [&](const std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi) {
    const std::size_t rows = hi - lo;
    batch_in.resize(rows * w_i);
    batch_tg.resize(rows * w_o);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t src = idx[lo + r];
      std::copy_n(in_norm.begin() + src * w_i, w_i, batch_in.begin() + r * w_i);
      std::copy_n(tg_norm.begin() + src * w_o, w_o, batch_tg.begin() + r * w_o);
    }
  };

  std::vector<std::size_t> val_order(n - n_train);
  std::iota(val_order.begin(), val_order.end(), n_train);

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    shuffle_indices(order, shuffle_rng);
    double train_abs = 0.0;
    for (std::size_t lo = 0; lo < n_train; lo += cfg.batch_size) {
      const std::size_t hi = std::min(lo + cfg.batch_size, n_train);
      gather(order, lo, hi);
      const std::size_t rows = hi - lo;
      Tensor x = batch_inputs(a, batch_in, rows, w_i);
      Tensor t({rows, w_o});
      std::copy(batch_tg.begin(), batch_tg.begin() + rows * w_o, t.data());

      model.net.zero_grads();
      Tensor pred;
      model.net.loss_forward(x, t, activity, &pred);
      model.net.loss_backward();
      auto params = model.net.params();
      auto grads = model.net.grads();
      adam.step(params, grads);
      if (cfg.max_norm_enabled) model.net.constrain_kernels(cfg.max_norm);
      model.gradient_update_samples += rows;
      train_abs += mae_loss(pred, t) * static_cast<double>(rows);
    }

    double val_abs = 0.0;
    for (std::size_t lo = 0; lo < val_order.size(); lo += cfg.batch_size) {
      const std::size_t hi = std::min(lo + cfg.batch_size, val_order.size());
      gather(val_order, lo, hi);
      const std::size_t rows = hi - lo;
      Tensor x = batch_inputs(a, batch_in, rows, w_i);
      Tensor t({rows, w_o});
      std::copy(batch_tg.begin(), batch_tg.begin() + rows * w_o, t.data());
      Tensor pred = model.net.forward(x, RunMode::infer);
      val_abs += mae_loss(pred, t) * static_cast<double>(rows);
    }

    EpochStats stats;
    stats.train_mae = model.norm.scale * train_abs / static_cast<double>(n_train);
    stats.val_mae = model.norm.scale * val_abs / static_cast<double>(n - n_train);
    model.history.push_back(stats);
  }
  return model;
}

void write_training_log(const std::string& path, const std::vector<EpochStats>& history) {
  std::string out = "epoch,train_mae,val_mae\n";
  char buf[128];
  for (std::size_t i = 0; i < history.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.12g,%.12g\n", i + 1, history[i].train_mae,
                  history[i].val_mae);
    out += buf;
  }
  write_file_atomic(path, out);
}

}  // namespace ntlc
