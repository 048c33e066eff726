#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "dialv/tensor.hpp"

namespace dialv {

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = x.maxCoeff();
  return m + std::log((x.array() - m).exp().sum());
}

/// Softmax with max-subtraction.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  VectorX<Scalar> e = (x.array() - x.maxCoeff()).exp();
  return e / e.sum();
}

template <typename Derived>
VectorX<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& x) {
  return x.array() - log_sum_exp(x);
}

template <typename Derived>
VectorX<typename Derived::Scalar> sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) {
    // Branch on sign so exp never overflows.
    if (v >= 0) return Scalar(1) / (Scalar(1) + std::exp(-v));
    const Scalar e = std::exp(v);
    return e / (Scalar(1) + e);
  });
}

}  // namespace dialv
