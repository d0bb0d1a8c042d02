#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace rtn {

/// Dense row-major array of doubles.
///
/// The last dimension is contiguous, so a [rows x cols] tensor stores row i at
/// data()[i * cols, (i + 1) * cols). Every dimension is positive and the
/// buffer length always equals the product of the shape. A default-constructed
/// tensor is the single exception: it has no shape and no data.
class Tensor {
 public:
  using Shape = std::vector<std::size_t>;

  Tensor() = default;
  /// Zero-filled tensor of the given shape.
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  /// Like the (shape, data) constructor, but also rejects NaN and infinities.
  /// Use this for anything read from outside the process.
  static Tensor from_external(Shape shape, std::vector<double> data);

  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor filled(Shape shape, double value);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  /// Rows/cols of a rank-2 tensor. Throws ShapeError otherwise.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& buffer() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }

  std::span<const double> row(std::size_t r) const;
  std::span<double> row(std::size_t r);

  /// New tensor holding rows [begin, end) of a rank-2 tensor.
  Tensor slice_rows(std::size_t begin, std::size_t end) const;
  /// New rank-2 tensor holding the listed rows, in order.
  Tensor gather_rows(std::span<const std::size_t> indices) const;
  Tensor reshaped(Shape shape) const;

  void fill(double value);
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::string shape_to_string(const Tensor::Shape& shape);

/// Stacks two rank-2 tensors with equal column counts vertically.
Tensor concat_rows(const Tensor& top, const Tensor& bottom);
Tensor transpose(const Tensor& a);

/// [m x k] * [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// result[i][j] = a[i] * b[j] for two rank-1 tensors.
Tensor outer(const Tensor& a, const Tensor& b);
/// Sum of squared componentwise differences.
double sq_dist(std::span<const double> a, std::span<const double> b);
double sq_dist(const Tensor& a, const Tensor& b);

struct Stats {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

/// Mean and population standard deviation over every element (two-pass).
Stats reduce_stats(std::span<const double> values);
Stats reduce_stats(const Tensor& values);

}  // namespace rtn
