#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "greg/errors.hpp"

namespace greg {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using Shape = std::vector<std::size_t>;

inline std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

/// Dense n-dimensional array with row-major storage.
///
/// The buffer is held as a row-major Eigen matrix whose rows are the leading
/// extent and whose columns are the product of the remaining extents. Rank 0
/// is a 1x1 matrix, rank 1 a single row. This keeps the flat layout identical
/// to the declared shape while letting the math code work on matrix views.
template <typename Scalar>
class BasicTensor {
 public:
  BasicTensor() : shape_{0}, data_(1, 0) {}

  explicit BasicTensor(Shape shape) : shape_(std::move(shape)) {
    const auto [r, c] = matrix_extents(shape_);
    data_ = MatrixX<Scalar>::Zero(r, c);
  }

  BasicTensor(Shape shape, std::span<const Scalar> values) : BasicTensor(std::move(shape)) {
    if (values.size() != size()) {
      throw ShapeError("tensor of shape " + shape_string(shape_) + " needs " +
                       std::to_string(size()) + " values, got " + std::to_string(values.size()));
    }
    std::copy(values.begin(), values.end(), data_.data());
  }

  /// Rank-2 tensor from a matrix expression.
  template <typename Derived>
  static BasicTensor from_matrix(const Eigen::MatrixBase<Derived>& m) {
    BasicTensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    t.data_ = m;
    return t;
  }

  /// Rank-1 tensor from a vector expression.
  template <typename Derived>
  static BasicTensor from_vector(const Eigen::MatrixBase<Derived>& v) {
    BasicTensor t({static_cast<std::size_t>(v.size())});
    for (Eigen::Index i = 0; i < v.size(); ++i) t.data_(0, i) = v(i);
    return t;
  }

  static BasicTensor scalar(Scalar value) {
    BasicTensor t(Shape{});
    t.data_(0, 0) = value;
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return static_cast<std::size_t>(data_.size()); }

  std::span<Scalar> values() { return {data_.data(), size()}; }
  std::span<const Scalar> values() const { return {data_.data(), size()}; }

  MatrixX<Scalar>& matrix() { return data_; }
  const MatrixX<Scalar>& matrix() const { return data_; }

  Scalar item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
    return data_(0, 0);
  }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static std::pair<Eigen::Index, Eigen::Index> matrix_extents(const Shape& shape) {
    if (shape.empty()) return {1, 1};
    if (shape.size() == 1) return {1, static_cast<Eigen::Index>(shape[0])};
    Shape rest(shape.begin() + 1, shape.end());
    return {static_cast<Eigen::Index>(shape[0]), static_cast<Eigen::Index>(shape_product(rest))};
  }

  Shape shape_;
  MatrixX<Scalar> data_;
};

using Tensor = BasicTensor<double>;

}  // namespace greg
