#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ntlc/tensor.hpp"

namespace ntlc {

enum class RunMode { train, infer };

enum class InitKind { he_uniform, glorot_uniform };

/// One differentiable stage of a network. forward() caches what backward()
/// needs; backward() consumes the cache from the most recent forward(),
/// accumulates parameter gradients and returns the gradient w.r.t. the input.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual Tensor forward(const Tensor& x, RunMode mode) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;

  virtual std::vector<Tensor*> params() { return {}; }
  virtual std::vector<Tensor*> grads() { return {}; }
  void zero_grads() {
    for (Tensor* g : grads()) g->fill(0.0);
  }

  /// Draws initial parameter values. Layers without parameters ignore it.
  virtual void init_params(std::mt19937_64&) {}

  /// Rescales kernel columns whose L2 norm exceeds max_norm down to it.
  virtual void constrain_kernels(double /*max_norm*/) {}
};

/// Fully connected layer: y = x W + b with W of shape {in, units}.
class DenseLayer : public Layer {
 public:
  DenseLayer(std::size_t in, std::size_t units, InitKind init);

  std::string kind() const override { return "dense"; }
  Tensor forward(const Tensor& x, RunMode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Tensor*> params() override { return {&w, &b}; }
  std::vector<Tensor*> grads() override { return {&gw, &gb}; }
  void init_params(std::mt19937_64& rng) override;
  void constrain_kernels(double max_norm) override;

  std::size_t in_features() const { return in_; }
  std::size_t units() const { return units_; }

  Tensor w, b, gw, gb;

 private:
  std::size_t in_, units_;
  InitKind init_;
  Tensor x_cache_;
};

/// 1-D convolution over {N, L, C} inputs, stride 1, cross-correlation form.
/// Kernel shape {K, C, filters}. "same" padding splits K-1 zeros with the
/// extra one on the right; "valid" shrinks the length to L - K + 1.
class Conv1dLayer : public Layer {
 public:
  enum class Padding { valid, same };

  Conv1dLayer(std::size_t in_channels, std::size_t filters, std::size_t kernel,
              Padding padding, InitKind init);

  std::string kind() const override { return "conv1d"; }
  Tensor forward(const Tensor& x, RunMode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Tensor*> params() override { return {&w, &b}; }
  std::vector<Tensor*> grads() override { return {&gw, &gb}; }
  void init_params(std::mt19937_64& rng) override;
  void constrain_kernels(double max_norm) override;

  std::size_t in_channels() const { return in_channels_; }
  std::size_t filters() const { return filters_; }
  std::size_t kernel() const { return kernel_; }
  Padding padding() const { return padding_; }

  Tensor w, b, gw, gb;

 private:
  std::size_t pad_left() const;
  std::size_t in_channels_, filters_, kernel_;
  Padding padding_;
  InitKind init_;
  Tensor x_cache_;
};

/// Max pooling over the length axis of {N, L, C}, valid (floor) geometry.
class MaxPool1dLayer : public Layer {
 public:
  MaxPool1dLayer(std::size_t width = 2, std::size_t stride = 2);

  std::string kind() const override { return "maxpool1d"; }
  Tensor forward(const Tensor& x, RunMode mode) override;
  Tensor backward(const Tensor& grad_out) override;

  std::size_t width() const { return width_; }
  std::size_t stride() const { return stride_; }

 private:
  std::size_t width_, stride_;
  std::vector<std::size_t> argmax_;  // flat input index per output element
  std::vector<std::size_t> in_shape_;
};

/// Per-channel batch normalization (channels = last axis, statistics over
/// every other axis). Training uses batch statistics and updates running
/// statistics with the configured momentum; inference uses running ones.
class BatchNormLayer : public Layer {
 public:
  explicit BatchNormLayer(std::size_t channels, double momentum = 0.99,
                          double epsilon = 1e-3);

  std::string kind() const override { return "batchnorm"; }
  Tensor forward(const Tensor& x, RunMode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Tensor*> params() override { return {&gamma, &beta}; }
  std::vector<Tensor*> grads() override { return {&ggamma, &gbeta}; }

  std::size_t channels() const { return channels_; }
  double momentum() const { return momentum_; }
  double epsilon() const { return epsilon_; }

  Tensor gamma, beta, ggamma, gbeta;
  Tensor running_mean, running_var;

 private:
  std::size_t channels_;
  double momentum_, epsilon_;
  Tensor xhat_cache_;
  std::vector<double> inv_std_cache_;
  std::vector<std::size_t> in_shape_;
  bool last_was_train_ = false;
};

/// Inverted dropout: training scales kept activations by 1/(1-rate) so
/// inference is the identity. The mask RNG is seeded from the network seed;
/// freezing reuses the previous mask, which gradient checks rely on.
class DropoutLayer : public Layer {
 public:
  explicit DropoutLayer(double rate);

  std::string kind() const override { return "dropout"; }
  Tensor forward(const Tensor& x, RunMode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void init_params(std::mt19937_64& rng) override;

  void set_frozen(bool frozen) { frozen_ = frozen; }
  double rate() const { return rate_; }

 private:
  double rate_;
  bool frozen_ = false;
  std::mt19937_64 rng_{0x9e3779b97f4a7c15ull};
  std::vector<double> mask_;  // per element: 0 or 1/(1-rate)
  bool train_path_ = false;
};

/// Standard LSTM over {N, L, C}. Gate order in the fused weight matrices is
/// input, forget, candidate, output. Sigmoid gates, tanh candidate and cell
/// output. Returns the full hidden sequence {N, L, U} or the last hidden
/// state {N, U}.
class LstmLayer : public Layer {
 public:
  LstmLayer(std::size_t in_features, std::size_t units, bool return_sequences);

  std::string kind() const override { return "lstm"; }
  Tensor forward(const Tensor& x, RunMode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Tensor*> params() override { return {&wx, &wh, &b}; }
  std::vector<Tensor*> grads() override { return {&gwx, &gwh, &gb}; }
  void init_params(std::mt19937_64& rng) override;
  void constrain_kernels(double max_norm) override;

  std::size_t in_features() const { return in_features_; }
  std::size_t units() const { return units_; }
  bool return_sequences() const { return return_sequences_; }

  Tensor wx, wh, b, gwx, gwh, gb;  // {C,4U}, {U,4U}, {4U}

 private:
  std::size_t in_features_, units_;
  bool return_sequences_;
  Tensor x_cache_;      // {N, L, C}
  Tensor gates_cache_;  // {N, L, 4U} post-activation i,f,g,o
  Tensor c_cache_;      // {N, L, U}
  Tensor h_cache_;      // {N, L, U}
};

/// Collapses {N, L, C} to {N, L*C}.
class FlattenLayer : public Layer {
 public:
  std::string kind() const override { return "flatten"; }
  Tensor forward(const Tensor& x, RunMode mode) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::vector<std::size_t> in_shape_;
};

/// Elementwise max(0, x); the derivative at exactly zero is taken as zero.
class ReluLayer : public Layer {
 public:
  std::string kind() const override { return "relu"; }
  Tensor forward(const Tensor& x, RunMode mode) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  Tensor x_cache_;
};

/// Mean absolute error over every element, with subgradient 0 at ties.
double mae_loss(const Tensor& pred, const Tensor& target);
Tensor mae_loss_grad(const Tensor& pred, const Tensor& target);

}  // namespace ntlc
