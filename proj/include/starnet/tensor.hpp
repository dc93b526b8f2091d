#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace starnet {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

// Dense row-major tensor of doubles. Value type: copies are deep and no
// operation in the library mutates an argument tensor.
class Tensor {
 public:
  Tensor() = default;

  // Checked construction: size must match the shape and every value must be
  // finite.
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  bool empty() const { return data_.empty(); }

  // 2-D view helpers. A rank-1 tensor [D] is treated as a single row [1 x D].
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

  // Same data, new shape of equal size.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const;
  bool operator==(const Tensor& other) const = default;

 private:
  struct Unchecked {};
  Tensor(Shape shape, std::vector<double> data, Unchecked);

  Shape shape_;
  std::vector<double> data_;

  friend Tensor make_unchecked(Shape shape, std::vector<double> data);
};

// Internal construction path for kernels whose outputs are finite whenever
// their inputs are.
Tensor make_unchecked(Shape shape, std::vector<double> data);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace starnet
