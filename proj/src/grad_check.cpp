#include "dialv/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace dialv {

namespace {

double evaluate(const ScalarFn& f, const Tensor& x) {
  Tape tape;
  return f(tape, tape.constant(x)).value().item();
}

}  // namespace

Tensor gradient(const ScalarFn& f, const Tensor& x) {
  Tape tape;
  Var input = tape.variable(x);
  Var out = f(tape, input);
  tape.backward(out);
  return input.grad();
}

Tensor numeric_gradient(const ScalarFn& f, const Tensor& x, double step) {
  if (!(step > 0.0)) throw UsageError("numeric_gradient: step must be positive");
  Tensor g(x.shape());
  Tensor probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    probe[i] = orig + step;
    const double up = evaluate(f, probe);
    probe[i] = orig - step;
    const double down = evaluate(f, probe);
    probe[i] = orig;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

double grad_check(const ScalarFn& f, const Tensor& x, double step) {
  const Tensor analytic = gradient(f, x);
  const Tensor numeric = numeric_gradient(f, x, step);
  double worst = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double err = std::abs(analytic[i] - numeric[i]) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace dialv
