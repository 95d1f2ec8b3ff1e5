#pragma once

#include <cstdint>
#include <vector>

#include "ntlc/tensor.hpp"

namespace ntlc {

struct AdamConfig {
  double step_size = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

void validate(const AdamConfig& cfg);

/// Adam optimizer with bias correction. Moment accumulators are created to
/// mirror the parameter list given at construction; step() must be called
/// with tensors of the same shapes in the same order.
class Adam {
 public:
  Adam(AdamConfig cfg, const std::vector<Tensor*>& params);

  void step(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads);

  std::uint64_t timestep() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace ntlc
