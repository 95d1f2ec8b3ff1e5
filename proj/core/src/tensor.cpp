#include "ntlc/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "ntlc/errors.hpp"

namespace ntlc {

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > 3) {
    throw ShapeError("tensor rank must be 1, 2 or 3");
  }
  std::size_t n = 1;
  for (std::size_t d : shape_) n *= d;
  data_.assign(n, 0.0);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::reshape(std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (n != data_.size()) {
    throw ShapeError("reshape changes element count");
  }
  shape_ = std::move(shape);
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_string() const {
  std::string s = "{";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape_[i]);
  }
  return s + "}";
}

}  // namespace ntlc
