// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssran {

/// Thrown when an operation receives tensors of incompatible shape.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when a numeric contract is violated (NaN/Inf, bad argument).
struct ValueError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Boolean validity mask over sequence positions. mask[j] != 0 means
/// position j is a real token; 0 means padding.
using Mask = std::vector<std::uint8_t>;

/// Dense row-major f64 array. Rank 0 is not used; scalars are shape {1}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), v_(count(shape_), 0.0) {}
  Tensor(std::vector<std::size_t> shape, double fill)
      : shape_(std::move(shape)), v_(count(shape_), fill) {}
  Tensor(std::vector<std::size_t> shape, std::vector<double> values)
      : shape_(std::move(shape)), v_(std::move(values)) {
    if (v_.size() != count(shape_)) throw ShapeError("Tensor: value count does not match shape");
  }

  static Tensor scalar(double x) { return Tensor({1}, std::vector<double>{x}); }
  static Tensor row(std::vector<double> values) {
    std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }
  static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> values) {
    return Tensor({r, c}, std::move(values));
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return v_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }

  /// Rows/cols of a rank-2 tensor; rank-1 tensors count as a single row.
  std::size_t rows() const { return rank() == 1 ? 1 : dim(0); }
  std::size_t cols() const { return rank() == 1 ? dim(0) : dim(rank() - 1); }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::vector<double>& values() { return v_; }
  const std::vector<double>& values() const { return v_; }

  double& at(std::size_t i) { return v_[i]; }
  double at(std::size_t i) const { return v_[i]; }
  double& at(std::size_t i, std::size_t j) { return v_[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return v_[i * cols() + j]; }

  double item() const {
    if (numel() != 1) throw ShapeError("Tensor::item: tensor is not a scalar");
    return v_[0];
  }

  void fill(double x) { std::fill(v_.begin(), v_.end(), x); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

 private:
  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

  std::vector<std::size_t> shape_;
  std::vector<double> v_;
};

/// Global toggle for post-op finiteness validation. On by default; the
/// training loop leaves it on and additionally checks every batch loss.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

/// Throws ValueError if any element is NaN/Inf and checks are enabled.
void check_finite(const Tensor& t, const char* where);

}  // namespace ssran
