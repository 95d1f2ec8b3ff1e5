#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "ntlc/layers.hpp"
#include "ntlc/tensor.hpp"

namespace ntlc {

/// Sequential layer stack with a mean-absolute-error training objective and
/// an optional L2 activity penalty on marked layer outputs (batch mean of the
/// summed squared activations, scaled by a coefficient).
class Network {
 public:
  Network() = default;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  /// Appends a layer; penalize_output marks its activations for the activity
  /// penalty. Returns the raw pointer for callers that need to configure it.
  Layer* add(std::unique_ptr<Layer> layer, bool penalize_output = false);

  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }
  bool penalized(std::size_t i) const { return penalized_[i]; }

  /// Draws every parameter from one seeded generator, in layer order.
  void init(std::uint64_t seed);

  Tensor forward(const Tensor& x, RunMode mode);

  /// Train-mode forward that caches activations for loss_backward. Returns
  /// MAE + activity penalty; writes the raw prediction if requested.
  double loss_forward(const Tensor& x, const Tensor& target, double activity_coeff,
                      Tensor* prediction = nullptr);

  /// Backpropagates the objective from the most recent loss_forward,
  /// accumulating parameter gradients.
  void loss_backward();

  void zero_grads();
  std::vector<Tensor*> params();
  std::vector<Tensor*> grads();

  void constrain_kernels(double max_norm);
  void set_dropout_frozen(bool frozen);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<bool> penalized_;
  std::vector<Tensor> acts_;
  Tensor pred_, target_;
  double activity_coeff_ = 0.0;
  bool have_loss_state_ = false;
};

}  // namespace ntlc
