#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <initializer_list>
#include <string>

#include "dialv/error.hpp"

namespace dialv {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using VectorXd = VectorX<double>;
using RowMatrixXd = RowMatrixX<double>;

/// Shape of a rank-1 or rank-2 tensor. Scalars are stored as shape {1}.
struct Shape {
  int rank = 1;
  std::array<Index, 2> dims{1, 1};

  static Shape vector(Index n) { return Shape{1, {n, 1}}; }
  static Shape matrix(Index rows, Index cols) { return Shape{2, {rows, cols}}; }
  static Shape scalar() { return vector(1); }

  Index size() const { return rank == 1 ? dims[0] : dims[0] * dims[1]; }
  Index rows() const { return dims[0]; }
  Index cols() const { return rank == 1 ? 1 : dims[1]; }
  bool is_vector() const { return rank == 1; }
  bool is_matrix() const { return rank == 2; }
  bool is_scalar() const { return rank == 1 && dims[0] == 1; }

  friend bool operator==(const Shape& a, const Shape& b) {
    return a.rank == b.rank && a.dims[0] == b.dims[0] && (a.rank == 1 || a.dims[1] == b.dims[1]);
  }

  std::string str() const {
    if (rank == 1) return "[" + std::to_string(dims[0]) + "]";
    return "[" + std::to_string(dims[0]) + "x" + std::to_string(dims[1]) + "]";
  }
};

/// Dense row-major array of rank 1 or 2. Values are plain data and may be
/// shared freely across threads once built.
template <typename Scalar>
class BasicTensor {
 public:
  using MatrixMap = Eigen::Map<RowMatrixX<Scalar>>;
  using ConstMatrixMap = Eigen::Map<const RowMatrixX<Scalar>>;

  BasicTensor() : shape_(Shape::vector(0)) {}

  explicit BasicTensor(Shape shape) : shape_(shape), data_(VectorX<Scalar>::Zero(shape.size())) {
    check_dims();
  }

  BasicTensor(Shape shape, VectorX<Scalar> data) : shape_(shape), data_(std::move(data)) {
    check_dims();
    if (data_.size() != shape_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
    }
  }

  /// Rank-1 tensor from any Eigen vector expression.
  template <typename Derived>
  static BasicTensor from_vector(const Eigen::MatrixBase<Derived>& v) {
    return BasicTensor(Shape::vector(v.size()), VectorX<Scalar>(v));
  }

  /// Rank-2 tensor from any Eigen matrix expression.
  template <typename Derived>
  static BasicTensor from_matrix(const Eigen::MatrixBase<Derived>& m) {
    RowMatrixX<Scalar> rm = m;
    return BasicTensor(Shape::matrix(rm.rows(), rm.cols()),
                       Eigen::Map<const VectorX<Scalar>>(rm.data(), rm.size()));
  }

  static BasicTensor vector(std::initializer_list<Scalar> values) {
    VectorX<Scalar> v(static_cast<Index>(values.size()));
    Index i = 0;
    for (Scalar x : values) v[i++] = x;
    const Shape shape = Shape::vector(v.size());
    return BasicTensor(shape, std::move(v));
  }

  static BasicTensor scalar(Scalar x) { return vector({x}); }

  const Shape& shape() const { return shape_; }
  Index size() const { return data_.size(); }

  VectorX<Scalar>& data() { return data_; }
  const VectorX<Scalar>& data() const { return data_; }

  MatrixMap matrix() { return MatrixMap(data_.data(), shape_.rows(), shape_.cols()); }
  ConstMatrixMap matrix() const { return ConstMatrixMap(data_.data(), shape_.rows(), shape_.cols()); }

  Scalar item() const {
    if (data_.size() != 1) throw UsageError("item() on tensor of shape " + shape_.str());
    return data_[0];
  }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  bool all_finite() const { return data_.allFinite(); }

 private:
  void check_dims() const {
    if (shape_.dims[0] < 0 || (shape_.rank == 2 && shape_.dims[1] < 0) ||
        (shape_.rank != 1 && shape_.rank != 2)) {
      throw ShapeError("invalid tensor shape " + shape_.str());
    }
  }

  Shape shape_;
  VectorX<Scalar> data_;
};

using Tensor = BasicTensor<double>;

}  // namespace dialv
