#include "ntlc/adam.hpp"

#include <cmath>

#include "ntlc/errors.hpp"

namespace ntlc {

void validate(const AdamConfig& cfg) {
  if (!(cfg.step_size > 0.0)) throw ConfigError("adam: step size must be > 0");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0) {
    throw ConfigError("adam: betas must be in [0, 1)");
  }
  if (!(cfg.epsilon > 0.0)) throw ConfigError("adam: epsilon must be > 0");
}

Adam::Adam(AdamConfig cfg, const std::vector<Tensor*>& params) : cfg_(cfg) {
  validate(cfg_);
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Tensor* p : params) {
    m_.emplace_back(std::vector<std::size_t>(p->shape()));
    v_.emplace_back(std::vector<std::size_t>(p->shape()));
  }
}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("adam: parameter list size changed");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    if (!p.same_shape(m_[i]) || !g.same_shape(m_[i])) {
      throw ShapeError("adam: parameter/gradient shape mismatch");
    }
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t e = 0; e < p.numel(); ++e) {
      m[e] = cfg_.beta1 * m[e] + (1.0 - cfg_.beta1) * g[e];
      v[e] = cfg_.beta2 * v[e] + (1.0 - cfg_.beta2) * g[e] * g[e];
      const double mhat = m[e] / bc1;
      const double vhat = v[e] / bc2;
      p[e] -= cfg_.step_size * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }
}

}  // namespace ntlc
