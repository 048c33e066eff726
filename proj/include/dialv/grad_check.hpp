#pragma once

#include <functional>

#include "dialv/tape.hpp"

namespace dialv {

/// A scalar-valued function recorded on a tape.
using ScalarFn = std::function<Var(Tape&, Var)>;

/// Largest |analytic - numeric| / max(1, |analytic|) over the coordinates of
/// `x`, where the numeric gradient is a central difference with `step`.
double grad_check(const ScalarFn& f, const Tensor& x, double step = 1e-5);

/// Analytic gradient of f at x.
Tensor gradient(const ScalarFn& f, const Tensor& x);

/// Central-difference gradient of f at x.
Tensor numeric_gradient(const ScalarFn& f, const Tensor& x, double step = 1e-5);

}  // namespace dialv
