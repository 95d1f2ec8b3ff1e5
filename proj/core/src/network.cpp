#include "ntlc/network.hpp"

#include <random>

#include "ntlc/errors.hpp"

namespace ntlc {

Layer* Network::add(std::unique_ptr<Layer> layer, bool penalize_output) {
  layers_.push_back(std::move(layer));
  penalized_.push_back(penalize_output);
  return layers_.back().get();
}

void Network::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& l : layers_) l->init_params(rng);
}

Tensor Network::forward(const Tensor& x, RunMode mode) {
  Tensor h = x;
  for (auto& l : layers_) h = l->forward(h, mode);
  return h;
}

double Network::loss_forward(const Tensor& x, const Tensor& target, double activity_coeff,
                             Tensor* prediction) {
  acts_.clear();
  acts_.reserve(layers_.size());
  Tensor h = x;
  for (auto& l : layers_) {
    h = l->forward(h, RunMode::train);
    acts_.push_back(h);
  }
  pred_ = h;
  target_ = target;
  activity_coeff_ = activity_coeff;
  have_loss_state_ = true;

  double loss = mae_loss(pred_, target_);
  if (activity_coeff != 0.0) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (!penalized_[i]) continue;
      const Tensor& a = acts_[i];
      double sq = 0.0;
      for (std::size_t e = 0; e < a.numel(); ++e) sq += a[e] * a[e];
      loss += activity_coeff * sq / static_cast<double>(a.dim(0));
    }
  }
  if (prediction) *prediction = pred_;
  return loss;
}

void Network::loss_backward() {
  if (!have_loss_state_) {
    throw ShapeError("loss_backward requires a preceding loss_forward");
  }
  Tensor g = mae_loss_grad(pred_, target_);
  for (std::size_t i = layers_.size(); i-- > 0;) {
    if (activity_coeff_ != 0.0 && penalized_[i]) {
      const Tensor& a = acts_[i];
      if (!g.same_shape(a)) {
        throw ShapeError("activity penalty: activation/gradient shape mismatch");
      }
      const double c = 2.0 * activity_coeff_ / static_cast<double>(a.dim(0));
      for (std::size_t e = 0; e < g.numel(); ++e) g[e] += c * a[e];
    }
    g = layers_[i]->backward(g);
  }
  have_loss_state_ = false;
}

void Network::zero_grads() {
  for (auto& l : layers_) l->zero_grads();
}

std::vector<Tensor*> Network::params() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) {
    for (Tensor* p : l->params()) out.push_back(p);
  }
  return out;
}

std::vector<Tensor*> Network::grads() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) {
    for (Tensor* g : l->grads()) out.push_back(g);
  }
  return out;
}

void Network::constrain_kernels(double max_norm) {
  for (auto& l : layers_) l->constrain_kernels(max_norm);
}

void Network::set_dropout_frozen(bool frozen) {
  for (auto& l : layers_) {
    if (auto* d = dynamic_cast<DropoutLayer*>(l.get())) d->set_frozen(frozen);
  }
}

}  // namespace ntlc
