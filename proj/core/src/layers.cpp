#include "ntlc/layers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <thread>

#include "ntlc/errors.hpp"

namespace ntlc {
namespace {

// Work is always split into the same fixed number of index chunks so that
// per-chunk reductions commit in a deterministic order no matter how many
// worker threads actually run.
constexpr std::size_t kChunks = 8;

void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  auto bound = [n](std::size_t c) { return c * n / kChunks; };
  unsigned hw = std::thread::hardware_concurrency();
  if (hw <= 1 || n < 2) {
    for (std::size_t c = 0; c < kChunks; ++c) {
      if (bound(c) < bound(c + 1)) fn(c, bound(c), bound(c + 1));
    }
    return;
  }
  std::vector<std::future<void>> tasks;
  tasks.reserve(kChunks);
  for (std::size_t c = 0; c < kChunks; ++c) {
    const std::size_t lo = bound(c), hi = bound(c + 1);
    if (lo >= hi) continue;
    tasks.push_back(std::async(std::launch::async, [&fn, c, lo, hi] { fn(c, lo, hi); }));
  }
  for (auto& t : tasks) t.get();
}

double uniform_limit(InitKind kind, std::size_t fan_in, std::size_t fan_out) {
  switch (kind) {
    case InitKind::he_uniform:
      return std::sqrt(6.0 / static_cast<double>(fan_in));
    case InitKind::glorot_uniform:
      return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  }
  throw DomainError("invalid init kind");
}

void draw_uniform(Tensor& t, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : t.flat()) v = dist(rng);
}

void expect_rank(const Tensor& x, std::size_t rank, const char* who) {
  if (x.rank() != rank) {
    throw ShapeError(std::string(who) + ": expected rank " + std::to_string(rank) +
                     " input, got shape " + x.shape_string());
  }
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

// ---------------------------------------------------------------------------
// Dense

DenseLayer::DenseLayer(std::size_t in, std::size_t units, InitKind init)
    : w({in, units}), b({units}), gw({in, units}), gb({units}),
      in_(in), units_(units), init_(init) {
  if (in == 0 || units == 0) throw ShapeError("dense layer dimensions must be > 0");
}

void DenseLayer::init_params(std::mt19937_64& rng) {
  draw_uniform(w, uniform_limit(init_, in_, units_), rng);
  b.fill(0.0);
}

Tensor DenseLayer::forward(const Tensor& x, RunMode) {
  expect_rank(x, 2, "dense");
  if (x.dim(1) != in_) {
    throw ShapeError("dense: input features " + std::to_string(x.dim(1)) +
                     " != " + std::to_string(in_));
  }
  x_cache_ = x;
  const std::size_t n = x.dim(0);
  Tensor y({n, units_});
  for (std::size_t i = 0; i < n; ++i) {
    double* yr = y.data() + i * units_;
    for (std::size_t u = 0; u < units_; ++u) yr[u] = b[u];
    const double* xr = x.data() + i * in_;
    for (std::size_t f = 0; f < in_; ++f) {
      const double xv = xr[f];
      const double* wr = w.data() + f * units_;
      for (std::size_t u = 0; u < units_; ++u) yr[u] += xv * wr[u];
    }
  }
  return y;
}

Tensor DenseLayer::backward(const Tensor& grad_out) {
  const std::size_t n = x_cache_.dim(0);
  if (grad_out.rank() != 2 || grad_out.dim(0) != n || grad_out.dim(1) != units_) {
    throw ShapeError("dense backward: gradient shape mismatch");
  }
  Tensor gx({n, in_});
  for (std::size_t i = 0; i < n; ++i) {
    const double* gr = grad_out.data() + i * units_;
    const double* xr = x_cache_.data() + i * in_;
    double* gxr = gx.data() + i * in_;
    for (std::size_t u = 0; u < units_; ++u) gb[u] += gr[u];
    for (std::size_t f = 0; f < in_; ++f) {
      const double xv = xr[f];
      double* gwr = gw.data() + f * units_;
      const double* wr = w.data() + f * units_;
      double acc = 0.0;
      for (std::size_t u = 0; u < units_; ++u) {
        gwr[u] += xv * gr[u];
        acc += gr[u] * wr[u];
      }
      gxr[f] = acc;
    }
  }
  return gx;
}

void DenseLayer::constrain_kernels(double max_norm) {
  for (std::size_t u = 0; u < units_; ++u) {
    double sq = 0.0;
    for (std::size_t f = 0; f < in_; ++f) sq += w.at2(f, u) * w.at2(f, u);
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
      const double s = max_norm / norm;
      for (std::size_t f = 0; f < in_; ++f) w.at2(f, u) *= s;
    }
  }
}

// ---------------------------------------------------------------------------
// Conv1d

Conv1dLayer::Conv1dLayer(std::size_t in_channels, std::size_t filters, std::size_t kernel,
                         Padding padding, InitKind init)
    : w({kernel, in_channels, filters}), b({filters}),
      gw({kernel, in_channels, filters}), gb({filters}),
      in_channels_(in_channels), filters_(filters), kernel_(kernel),
      padding_(padding), init_(init) {
  if (in_channels == 0 || filters == 0 || kernel == 0) {
    throw ShapeError("conv1d dimensions must be > 0");
  }
}

std::size_t Conv1dLayer::pad_left() const {
  return padding_ == Padding::same ? (kernel_ - 1) / 2 : 0;
}

void Conv1dLayer::init_params(std::mt19937_64& rng) {
  draw_uniform(w, uniform_limit(init_, in_channels_ * kernel_, filters_ * kernel_), rng);
  b.fill(0.0);
}

Tensor Conv1dLayer::forward(const Tensor& x, RunMode) {
  expect_rank(x, 3, "conv1d");
  if (x.dim(2) != in_channels_) {
    throw ShapeError("conv1d: input channels " + std::to_string(x.dim(2)) +
                     " != " + std::to_string(in_channels_));
  }
  const std::size_t n = x.dim(0), len = x.dim(1);
  std::size_t out_len;
  if (padding_ == Padding::valid) {
    if (len < kernel_) throw ShapeError("conv1d: input shorter than kernel");
    out_len = len - kernel_ + 1;
  } else {
    out_len = len;
  }
  x_cache_ = x;
  Tensor y({n, out_len, filters_});
  const std::size_t padl = pad_left();

  parallel_chunks(n, [&](std::size_t, std::size_t nb, std::size_t ne) {
    for (std::size_t i = nb; i < ne; ++i) {
      for (std::size_t t = 0; t < out_len; ++t) {
        double* yr = y.data() + (i * out_len + t) * filters_;
        for (std::size_t f = 0; f < filters_; ++f) yr[f] = b[f];
        for (std::size_t k = 0; k < kernel_; ++k) {
          const std::ptrdiff_t xi = static_cast<std::ptrdiff_t>(t + k) -
                                    static_cast<std::ptrdiff_t>(padl);
          if (xi < 0 || xi >= static_cast<std::ptrdiff_t>(len)) continue;
          const double* xr = x.data() + (i * len + xi) * in_channels_;
          const double* wk = w.data() + k * in_channels_ * filters_;
          for (std::size_t c = 0; c < in_channels_; ++c) {
            const double xv = xr[c];
            if (xv == 0.0) continue;
            const double* wr = wk + c * filters_;
            for (std::size_t f = 0; f < filters_; ++f) yr[f] += xv * wr[f];
          }
        }
      }
    }
  });
  return y;
}

Tensor Conv1dLayer::backward(const Tensor& grad_out) {
  const std::size_t n = x_cache_.dim(0), len = x_cache_.dim(1);
  const std::size_t out_len = padding_ == Padding::valid ? len - kernel_ + 1 : len;
  if (grad_out.rank() != 3 || grad_out.dim(0) != n || grad_out.dim(1) != out_len ||
      grad_out.dim(2) != filters_) {
    throw ShapeError("conv1d backward: gradient shape mismatch");
  }
  const std::size_t padl = pad_left();
  Tensor gx({n, len, in_channels_});

  std::vector<Tensor> gw_part(kChunks, Tensor({kernel_, in_channels_, filters_}));
  std::vector<Tensor> gb_part(kChunks, Tensor({filters_}));

  parallel_chunks(n, [&](std::size_t chunk, std::size_t nb, std::size_t ne) {
    Tensor& gwp = gw_part[chunk];
    Tensor& gbp = gb_part[chunk];
    for (std::size_t i = nb; i < ne; ++i) {
      for (std::size_t t = 0; t < out_len; ++t) {
        const double* gr = grad_out.data() + (i * out_len + t) * filters_;
        for (std::size_t f = 0; f < filters_; ++f) gbp[f] += gr[f];
        for (std::size_t k = 0; k < kernel_; ++k) {
          const std::ptrdiff_t xi = static_cast<std::ptrdiff_t>(t + k) -
                                    static_cast<std::ptrdiff_t>(padl);
          if (xi < 0 || xi >= static_cast<std::ptrdiff_t>(len)) continue;
          const double* xr = x_cache_.data() + (i * len + xi) * in_channels_;
          double* gxr = gx.data() + (i * len + xi) * in_channels_;
          const std::size_t base = k * in_channels_ * filters_;
          for (std::size_t c = 0; c < in_channels_; ++c) {
            const double xv = xr[c];
            double* gwr = gwp.data() + base + c * filters_;
            const double* wr = w.data() + base + c * filters_;
            double acc = 0.0;
            for (std::size_t f = 0; f < filters_; ++f) {
              gwr[f] += xv * gr[f];
              acc += gr[f] * wr[f];
            }
            gxr[c] += acc;
          }
        }
      }
    }
  });

  for (std::size_t c = 0; c < kChunks; ++c) {
    for (std::size_t e = 0; e < gw.numel(); ++e) gw[e] += gw_part[c][e];
    for (std::size_t e = 0; e < gb.numel(); ++e) gb[e] += gb_part[c][e];
  }
  return gx;
}

void Conv1dLayer::constrain_kernels(double max_norm) {
  // Per-filter norm over the (kernel, channel) extent.
  for (std::size_t f = 0; f < filters_; ++f) {
    double sq = 0.0;
    for (std::size_t k = 0; k < kernel_; ++k) {
      for (std::size_t c = 0; c < in_channels_; ++c) {
        const double v = w.at3(k, c, f);
        sq += v * v;
      }
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
      const double s = max_norm / norm;
      for (std::size_t k = 0; k < kernel_; ++k) {
        for (std::size_t c = 0; c < in_channels_; ++c) w.at3(k, c, f) *= s;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// MaxPool1d

MaxPool1dLayer::MaxPool1dLayer(std::size_t width, std::size_t stride)
    : width_(width), stride_(stride) {
  if (width == 0 || stride == 0) throw ShapeError("maxpool1d: width and stride must be > 0");
}

Tensor MaxPool1dLayer::forward(const Tensor& x, RunMode) {
  expect_rank(x, 3, "maxpool1d");
  const std::size_t n = x.dim(0), len = x.dim(1), ch = x.dim(2);
  if (len < width_) throw ShapeError("maxpool1d: input shorter than pool width");
  const std::size_t out_len = (len - width_) / stride_ + 1;

  in_shape_ = {n, len, ch};
  Tensor y({n, out_len, ch});
  argmax_.assign(y.numel(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < out_len; ++t) {
      for (std::size_t c = 0; c < ch; ++c) {
        const std::size_t base = t * stride_;
        std::size_t best = (i * len + base) * ch + c;
        double best_v = x[best];
        for (std::size_t k = 1; k < width_; ++k) {
          const std::size_t idx = (i * len + base + k) * ch + c;
          if (x[idx] > best_v) {
            best_v = x[idx];
            best = idx;
          }
        }
        const std::size_t oi = (i * out_len + t) * ch + c;
        y[oi] = best_v;
        argmax_[oi] = best;
      }
    }
  }
  return y;
}

Tensor MaxPool1dLayer::backward(const Tensor& grad_out) {
  if (grad_out.numel() != argmax_.size()) {
    throw ShapeError("maxpool1d backward: gradient shape mismatch");
  }
  Tensor gx{std::vector<std::size_t>(in_shape_)};
  for (std::size_t e = 0; e < argmax_.size(); ++e) gx[argmax_[e]] += grad_out[e];
  return gx;
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNormLayer::BatchNormLayer(std::size_t channels, double momentum, double epsilon)
    : gamma({channels}), beta({channels}), ggamma({channels}), gbeta({channels}),
      running_mean({channels}), running_var({channels}),
      channels_(channels), momentum_(momentum), epsilon_(epsilon) {
  if (channels == 0) throw ShapeError("batchnorm: channels must be > 0");
  gamma.fill(1.0);
  running_var.fill(1.0);
}

Tensor BatchNormLayer::forward(const Tensor& x, RunMode mode) {
  if (x.rank() < 2 || x.shape().back() != channels_) {
    throw ShapeError("batchnorm: last axis must be " + std::to_string(channels_));
  }
  const std::size_t rows = x.numel() / channels_;
  in_shape_ = x.shape();
  Tensor y{std::vector<std::size_t>(x.shape())};
  last_was_train_ = (mode == RunMode::train);

  if (mode == RunMode::infer) {
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = x.data() + r * channels_;
      double* yr = y.data() + r * channels_;
      for (std::size_t c = 0; c < channels_; ++c) {
        yr[c] = gamma[c] * (xr[c] - running_mean[c]) /
                    std::sqrt(running_var[c] + epsilon_) + beta[c];
      }
    }
    return y;
  }

  std::vector<double> mean(channels_, 0.0), var(channels_, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * channels_;
    for (std::size_t c = 0; c < channels_; ++c) mean[c] += xr[c];
  }
  for (std::size_t c = 0; c < channels_; ++c) mean[c] /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * channels_;
    for (std::size_t c = 0; c < channels_; ++c) {
      const double d = xr[c] - mean[c];
      var[c] += d * d;
    }
  }
  for (std::size_t c = 0; c < channels_; ++c) var[c] /= static_cast<double>(rows);

  xhat_cache_ = Tensor(std::vector<std::size_t>(x.shape()));
  inv_std_cache_.assign(channels_, 0.0);
  for (std::size_t c = 0; c < channels_; ++c) {
    inv_std_cache_[c] = 1.0 / std::sqrt(var[c] + epsilon_);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * channels_;
    double* hr = xhat_cache_.data() + r * channels_;
    double* yr = y.data() + r * channels_;
    for (std::size_t c = 0; c < channels_; ++c) {
      hr[c] = (xr[c] - mean[c]) * inv_std_cache_[c];
      yr[c] = gamma[c] * hr[c] + beta[c];
    }
  }
  for (std::size_t c = 0; c < channels_; ++c) {
    running_mean[c] = momentum_ * running_mean[c] + (1.0 - momentum_) * mean[c];
    running_var[c] = momentum_ * running_var[c] + (1.0 - momentum_) * var[c];
  }
  return y;
}

Tensor BatchNormLayer::backward(const Tensor& grad_out) {
  if (!last_was_train_) {
    throw ShapeError("batchnorm backward requires a preceding train-mode forward");
  }
  if (grad_out.shape() != in_shape_) {
    throw ShapeError("batchnorm backward: gradient shape mismatch");
  }
  const std::size_t rows = grad_out.numel() / channels_;
  const double m = static_cast<double>(rows);

  std::vector<double> sum_g(channels_, 0.0), sum_gx(channels_, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* gr = grad_out.data() + r * channels_;
    const double* hr = xhat_cache_.data() + r * channels_;
    for (std::size_t c = 0; c < channels_; ++c) {
      sum_g[c] += gr[c];
      sum_gx[c] += gr[c] * hr[c];
    }
  }
  for (std::size_t c = 0; c < channels_; ++c) {
    gbeta[c] += sum_g[c];
    ggamma[c] += sum_gx[c];
  }

  Tensor gx{std::vector<std::size_t>(in_shape_)};
  for (std::size_t r = 0; r < rows; ++r) {
    const double* gr = grad_out.data() + r * channels_;
    const double* hr = xhat_cache_.data() + r * channels_;
    double* gxr = gx.data() + r * channels_;
    for (std::size_t c = 0; c < channels_; ++c) {
      gxr[c] = gamma[c] * inv_std_cache_[c] *
               (gr[c] - sum_g[c] / m - hr[c] * sum_gx[c] / m);
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Dropout

DropoutLayer::DropoutLayer(double rate) : rate_(rate) {
  if (rate < 0.0 || rate >= 1.0) throw DomainError("dropout rate must be in [0, 1)");
}

void DropoutLayer::init_params(std::mt19937_64& rng) {
  rng_.seed(rng());
  mask_.clear();
}

Tensor DropoutLayer::forward(const Tensor& x, RunMode mode) {
  if (mode == RunMode::infer || rate_ == 0.0) {
    train_path_ = false;
    return x;
  }
  train_path_ = true;
  const double keep = 1.0 - rate_;
  if (!(frozen_ && mask_.size() == x.numel())) {
    mask_.resize(x.numel());
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (double& mv : mask_) mv = dist(rng_) < keep ? 1.0 / keep : 0.0;
  }
  Tensor y = x;
  for (std::size_t e = 0; e < y.numel(); ++e) y[e] *= mask_[e];
  return y;
}

Tensor DropoutLayer::backward(const Tensor& grad_out) {
  if (!train_path_) return grad_out;
  if (grad_out.numel() != mask_.size()) {
    throw ShapeError("dropout backward: gradient shape mismatch");
  }
  Tensor gx = grad_out;
  for (std::size_t e = 0; e < gx.numel(); ++e) gx[e] *= mask_[e];
  return gx;
}

// ---------------------------------------------------------------------------
// LSTM

LstmLayer::LstmLayer(std::size_t in_features, std::size_t units, bool return_sequences)
    : wx({in_features, 4 * units}), wh({units, 4 * units}), b({4 * units}),
      gwx({in_features, 4 * units}), gwh({units, 4 * units}), gb({4 * units}),
      in_features_(in_features), units_(units), return_sequences_(return_sequences) {
  if (in_features == 0 || units == 0) throw ShapeError("lstm dimensions must be > 0");
}

void LstmLayer::init_params(std::mt19937_64& rng) {
  draw_uniform(wx, uniform_limit(InitKind::glorot_uniform, in_features_, 4 * units_), rng);
  draw_uniform(wh, uniform_limit(InitKind::glorot_uniform, units_, 4 * units_), rng);
  b.fill(0.0);
  // Forget-gate bias starts at one so early training does not erase state.
  for (std::size_t u = 0; u < units_; ++u) b[units_ + u] = 1.0;
}

Tensor LstmLayer::forward(const Tensor& x, RunMode) {
  expect_rank(x, 3, "lstm");
  if (x.dim(2) != in_features_) {
    throw ShapeError("lstm: input features " + std::to_string(x.dim(2)) +
                     " != " + std::to_string(in_features_));
  }
  const std::size_t n = x.dim(0), len = x.dim(1);
  const std::size_t u4 = 4 * units_;
  x_cache_ = x;
  gates_cache_ = Tensor({n, len, u4});
  c_cache_ = Tensor({n, len, units_});
  h_cache_ = Tensor({n, len, units_});

  parallel_chunks(n, [&](std::size_t, std::size_t nb, std::size_t ne) {
    std::vector<double> h(units_), c(units_), z(u4);
    for (std::size_t i = nb; i < ne; ++i) {
      std::fill(h.begin(), h.end(), 0.0);
      std::fill(c.begin(), c.end(), 0.0);
      for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t j = 0; j < u4; ++j) z[j] = b[j];
        const double* xr = x.data() + (i * len + t) * in_features_;
        for (std::size_t f = 0; f < in_features_; ++f) {
          const double xv = xr[f];
          const double* wr = wx.data() + f * u4;
          for (std::size_t j = 0; j < u4; ++j) z[j] += xv * wr[j];
        }
        for (std::size_t uu = 0; uu < units_; ++uu) {
          const double hv = h[uu];
          if (hv == 0.0) continue;
          const double* wr = wh.data() + uu * u4;
          for (std::size_t j = 0; j < u4; ++j) z[j] += hv * wr[j];
        }
        double* gr = gates_cache_.data() + (i * len + t) * u4;
        double* cr = c_cache_.data() + (i * len + t) * units_;
        double* hr = h_cache_.data() + (i * len + t) * units_;
        for (std::size_t uu = 0; uu < units_; ++uu) {
          const double gi = sigmoid(z[uu]);
          const double gf = sigmoid(z[units_ + uu]);
          const double gg = std::tanh(z[2 * units_ + uu]);
          const double go = sigmoid(z[3 * units_ + uu]);
          gr[uu] = gi;
          gr[units_ + uu] = gf;
          gr[2 * units_ + uu] = gg;
          gr[3 * units_ + uu] = go;
          c[uu] = gf * c[uu] + gi * gg;
          cr[uu] = c[uu];
          h[uu] = go * std::tanh(c[uu]);
          hr[uu] = h[uu];
        }
      }
    }
  });

  if (return_sequences_) return h_cache_;
  Tensor y({n, units_});
  for (std::size_t i = 0; i < n; ++i) {
    const double* hr = h_cache_.data() + (i * len + (len - 1)) * units_;
    double* yr = y.data() + i * units_;
    std::copy(hr, hr + units_, yr);
  }
  return y;
}

Tensor LstmLayer::backward(const Tensor& grad_out) {
  const std::size_t n = x_cache_.dim(0), len = x_cache_.dim(1);
  const std::size_t u4 = 4 * units_;
  if (return_sequences_) {
    if (grad_out.rank() != 3 || grad_out.dim(0) != n || grad_out.dim(1) != len ||
        grad_out.dim(2) != units_) {
      throw ShapeError("lstm backward: gradient shape mismatch");
    }
  } else if (grad_out.rank() != 2 || grad_out.dim(0) != n || grad_out.dim(1) != units_) {
    throw ShapeError("lstm backward: gradient shape mismatch");
  }

  Tensor gx({n, len, in_features_});
  std::vector<Tensor> gwx_part(kChunks, Tensor({in_features_, u4}));
  std::vector<Tensor> gwh_part(kChunks, Tensor({units_, u4}));
  std::vector<Tensor> gb_part(kChunks, Tensor({u4}));

  parallel_chunks(n, [&](std::size_t chunk, std::size_t nb, std::size_t ne) {
    Tensor& gwxp = gwx_part[chunk];
    Tensor& gwhp = gwh_part[chunk];
    Tensor& gbp = gb_part[chunk];
    std::vector<double> dh(units_), dc(units_), da(u4), dh_prev(units_);
    for (std::size_t i = nb; i < ne; ++i) {
      std::fill(dh.begin(), dh.end(), 0.0);
      std::fill(dc.begin(), dc.end(), 0.0);
      for (std::size_t t = len; t-- > 0;) {
        if (return_sequences_) {
          const double* gr = grad_out.data() + (i * len + t) * units_;
          for (std::size_t uu = 0; uu < units_; ++uu) dh[uu] += gr[uu];
        } else if (t == len - 1) {
          const double* gr = grad_out.data() + i * units_;
          for (std::size_t uu = 0; uu < units_; ++uu) dh[uu] += gr[uu];
        }
        const double* gr = gates_cache_.data() + (i * len + t) * u4;
        const double* cr = c_cache_.data() + (i * len + t) * units_;
        const double* cprev =
            t > 0 ? c_cache_.data() + (i * len + t - 1) * units_ : nullptr;
        for (std::size_t uu = 0; uu < units_; ++uu) {
          const double gi = gr[uu];
          const double gf = gr[units_ + uu];
          const double gg = gr[2 * units_ + uu];
          const double go = gr[3 * units_ + uu];
          const double tc = std::tanh(cr[uu]);
          const double dct = dc[uu] + dh[uu] * go * (1.0 - tc * tc);
          const double cp = cprev ? cprev[uu] : 0.0;
          da[uu] = dct * gg * gi * (1.0 - gi);                    // input gate
          da[units_ + uu] = dct * cp * gf * (1.0 - gf);           // forget gate
          da[2 * units_ + uu] = dct * gi * (1.0 - gg * gg);       // candidate
          da[3 * units_ + uu] = dh[uu] * tc * go * (1.0 - go);    // output gate
          dc[uu] = dct * gf;
        }
        const double* xr = x_cache_.data() + (i * len + t) * in_features_;
        double* gxr = gx.data() + (i * len + t) * in_features_;
        for (std::size_t j = 0; j < u4; ++j) gbp[j] += da[j];
        for (std::size_t f = 0; f < in_features_; ++f) {
          const double xv = xr[f];
          double* gwr = gwxp.data() + f * u4;
          const double* wr = wx.data() + f * u4;
          double acc = 0.0;
          for (std::size_t j = 0; j < u4; ++j) {
            gwr[j] += xv * da[j];
            acc += da[j] * wr[j];
          }
          gxr[f] = acc;
        }
        std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
        if (t > 0) {
          const double* hprev = h_cache_.data() + (i * len + t - 1) * units_;
          for (std::size_t uu = 0; uu < units_; ++uu) {
            const double hv = hprev[uu];
            double* gwr = gwhp.data() + uu * u4;
            const double* wr = wh.data() + uu * u4;
            double acc = 0.0;
            for (std::size_t j = 0; j < u4; ++j) {
              gwr[j] += hv * da[j];
              acc += da[j] * wr[j];
            }
            dh_prev[uu] = acc;
          }
        }
        dh = dh_prev;
      }
    }
  });

  for (std::size_t c = 0; c < kChunks; ++c) {
    for (std::size_t e = 0; e < gwx.numel(); ++e) gwx[e] += gwx_part[c][e];
    for (std::size_t e = 0; e < gwh.numel(); ++e) gwh[e] += gwh_part[c][e];
    for (std::size_t e = 0; e < gb.numel(); ++e) gb[e] += gb_part[c][e];
  }
  return gx;
}

void LstmLayer::constrain_kernels(double max_norm) {
  const std::size_t u4 = 4 * units_;
  auto constrain = [&](Tensor& m, std::size_t rows) {
    for (std::size_t j = 0; j < u4; ++j) {
      double sq = 0.0;
      for (std::size_t r = 0; r < rows; ++r) sq += m.at2(r, j) * m.at2(r, j);
      const double norm = std::sqrt(sq);
      if (norm > max_norm) {
        const double s = max_norm / norm;
        for (std::size_t r = 0; r < rows; ++r) m.at2(r, j) *= s;
      }
    }
  };
  constrain(wx, in_features_);
  constrain(wh, units_);
}

// ---------------------------------------------------------------------------
// Flatten / ReLU

Tensor FlattenLayer::forward(const Tensor& x, RunMode) {
  expect_rank(x, 3, "flatten");
  in_shape_ = x.shape();
  Tensor y = x;
  y.reshape({x.dim(0), x.dim(1) * x.dim(2)});
  return y;
}

Tensor FlattenLayer::backward(const Tensor& grad_out) {
  Tensor gx = grad_out;
  gx.reshape(std::vector<std::size_t>(in_shape_));
  return gx;
}

Tensor ReluLayer::forward(const Tensor& x, RunMode) {
  x_cache_ = x;
  Tensor y = x;
  for (double& v : y.flat()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor ReluLayer::backward(const Tensor& grad_out) {
  if (grad_out.numel() != x_cache_.numel()) {
    throw ShapeError("relu backward: gradient shape mismatch");
  }
  Tensor gx = grad_out;
  for (std::size_t e = 0; e < gx.numel(); ++e) {
    if (x_cache_[e] <= 0.0) gx[e] = 0.0;
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Loss

double mae_loss(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) throw ShapeError("mae: prediction/target shape mismatch");
  double acc = 0.0;
  for (std::size_t e = 0; e < pred.numel(); ++e) acc += std::abs(pred[e] - target[e]);
  return acc / static_cast<double>(pred.numel());
}

Tensor mae_loss_grad(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) throw ShapeError("mae: prediction/target shape mismatch");
  Tensor g{std::vector<std::size_t>(pred.shape())};
  const double scale = 1.0 / static_cast<double>(pred.numel());
  for (std::size_t e = 0; e < pred.numel(); ++e) {
    const double d = pred[e] - target[e];
    g[e] = d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0);
  }
  return g;
}

}  // namespace ntlc
