#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace skelgroup {

using Shape = std::vector<std::size_t>;

// Storage with a fixed base alignment. Eigen's vectorized reductions peel
// a different number of leading elements depending on the address, so an
// allocation-dependent alignment would make sums differ in the last bit
// from run to run.
using AlignedBuffer = std::vector<double, Eigen::aligned_allocator<double>>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major tensor of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  template <class... Idx>
  double& operator()(Idx... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <class... Idx>
  double operator()(Idx... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  // Changes the shape in place; the element count must not change.
  void reshape(Shape shape);
  void fill(double value);
  bool all_finite() const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double scale);

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const;

  Shape shape_;
  AlignedBuffer data_;
};

double max_abs_difference(const Tensor& a, const Tensor& b);

}  // namespace skelgroup
