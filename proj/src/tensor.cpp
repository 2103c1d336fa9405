#include "psim/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace psim {

int64_t numel_of(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor shape has non-positive extent " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  if (shape.size() > 4) throw std::invalid_argument("tensor rank > 4: " + shape_str(shape));
  data.assign(static_cast<size_t>(numel_of(shape)), 0.0);
}

Tensor Tensor::full(std::vector<int> s, double v) {
  Tensor t(std::move(s));
  for (auto& x : t.data) x = v;
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t({1});
  t.data[0] = v;
  return t;
}

Tensor Tensor::uniform(std::vector<int> s, RngStream& rng, double lo, double hi) {
  Tensor t(std::move(s));
  for (auto& x : t.data) x = rng.next_uniform(lo, hi);
  return t;
}

Tensor Tensor::gaussian(std::vector<int> s, RngStream& rng, double mean, double stddev) {
  Tensor t(std::move(s));
  for (auto& x : t.data) x = mean + stddev * rng.next_gaussian();
  return t;
}

bool Tensor::all_finite() const {
  for (double x : data)
    if (!std::isfinite(x)) return false;
  return true;
}

double Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("item() on tensor of shape " + shape_str(shape));
  return data[0];
}

}  // namespace psim
