#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "deepbf/core.hpp"

namespace deepbf::nn {

struct Shape4 {
  std::size_t n = 0, c = 0, h = 0, w = 0;
  std::size_t size() const { return n * c * h * w; }
  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

/// Dense NCHW tensor of doubles.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 s, double fill = 0.0) : shape_(s), data_(s.size(), fill) {}
  Tensor4(std::size_t n, std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : Tensor4(Shape4{n, c, h, w}, fill) {}

  const Shape4& shape() const { return shape_; }
  std::size_t n() const { return shape_.n; }
  std::size_t c() const { return shape_.c; }
  std::size_t h() const { return shape_.h; }
  std::size_t w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  double& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[index(n, c, h, w)];
  }
  double operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[index(n, c, h, w)];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  /// Pointer to sample n.
  double* sample(std::size_t n) { return data_.data() + n * shape_.c * shape_.h * shape_.w; }
  const double* sample(std::size_t n) const {
    return data_.data() + n * shape_.c * shape_.h * shape_.w;
  }

  bool operator==(const Tensor4&) const = default;

 private:
  Shape4 shape_;
  std::vector<double> data_;
};

}  // namespace deepbf::nn
