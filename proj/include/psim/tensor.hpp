#pragma once

// Dense row-major tensor of doubles, rank <= 4. Images are N x C x H x W.

#include <cstdint>
#include <string>
#include <vector>

#include "psim/rng.hpp"

namespace psim {

struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, double v);
  static Tensor scalar(double v);
  static Tensor uniform(std::vector<int> s, RngStream& rng, double lo = 0.0, double hi = 1.0);
  static Tensor gaussian(std::vector<int> s, RngStream& rng, double mean = 0.0, double stddev = 1.0);

  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;

  double& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  // 4-d accessor for N x C x H x W tensors.
  double& at(int n, int c, int h, int w) {
    return data[static_cast<size_t>(((static_cast<int64_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w)];
  }
  double at(int n, int c, int h, int w) const {
    return data[static_cast<size_t>(((static_cast<int64_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w)];
  }

  double item() const;  // value of a single-element tensor
};

int64_t numel_of(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

}  // namespace psim
