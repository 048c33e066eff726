#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "dialv/error.hpp"
#include "dialv/grad_check.hpp"
#include "dialv/math.hpp"
#include "dialv/random.hpp"
#include "dialv/tape.hpp"

using namespace dialv;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = lo + (hi - lo) * rng.uniform();
  return t;
}

// Reduces any op output to a scalar with fixed random weights so that every
// output coordinate contributes a distinct gradient.
Var weighted_sum(Tape& tape, Var v, std::uint64_t seed) {
  Rng rng(seed);
  Tensor w(v.shape());
  for (Index i = 0; i < w.size(); ++i) w[i] = rng.uniform() * 2.0 - 1.0;
  return sum(mul(v, tape.constant(w)));
}

}  // namespace

TEST_CASE("forward values") {
  Tape tape;
  Var z = tape.constant(Tensor::vector({0.0, 0.0}));
  CHECK(tanh(z).value().data() == VectorXd::Zero(2));
  CHECK(sigmoid(tape.constant(Tensor::vector({0.0}))).value()[0] == 0.5);

  Rng rng(3);
  Tensor a = random_tensor(Shape::matrix(3, 3), rng);
  Var prod = matmul(tape.constant(Tensor::from_matrix(RowMatrixXd::Identity(3, 3))), tape.constant(a));
  CHECK(prod.value().matrix() == a.matrix());

  Var m = tape.constant(Tensor::from_matrix((RowMatrixXd(2, 3) << 1, 2, 3, 4, 5, 6).finished()));
  Var v = tape.constant(Tensor::vector({1.0, 0.0, -1.0}));
  CHECK(matmul(m, v).value().data() == (VectorXd(2) << -2, -2).finished());
  CHECK(exp(tape.constant(Tensor::scalar(0.0))).value().item() == 1.0);
  CHECK(log(tape.constant(Tensor::scalar(1.0))).value().item() == 0.0);
  CHECK(pick(v, 2).value().item() == -1.0);
}

TEST_CASE("backward examples") {
  SUBCASE("sum of squares") {
    Tape tape;
    Var x = tape.variable(Tensor::vector({1.0, 2.0}));
    tape.backward(sum(mul(x, x)));
    CHECK(x.grad().data() == (VectorXd(2) << 2, 4).finished());
  }
  SUBCASE("tanh at zero") {
    Tape tape;
    Var x = tape.variable(Tensor::vector({0.0}));
    tape.backward(sum(tanh(x)));
    CHECK(x.grad()[0] == 1.0);
  }
  SUBCASE("shared operand accumulates") {
    Tape tape;
    Var x = tape.variable(Tensor::scalar(3.0));
    tape.backward(sum(add(mul(x, x), x)));
    CHECK(x.grad()[0] == doctest::Approx(7.0));
  }
}

TEST_CASE("two-layer tanh network matches finite differences") {
  // Parameters packed as [W1 (2), b1 (2), w2 (1)]; the input is the scalar 0.7.
  const ScalarFn net = [](Tape&, Var p) {
    Var h = tanh(add(scale(slice(p, 0, 2), 0.7), slice(p, 2, 2)));
    return sum(tanh(mul(slice(p, 4, 1), sum(h))));
  };
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    CHECK(grad_check(net, random_tensor(Shape::vector(5), rng)) <= 1e-5);
  }
}

TEST_CASE("grad_check reference functions") {
  Rng rng(5);
  const ScalarFn f_sum = [](Tape&, Var x) { return sum(x); };
  CHECK(grad_check(f_sum, random_tensor(Shape::vector(6), rng)) <= 1e-9);

  const Tensor W = random_tensor(Shape::matrix(4, 3), rng);
  const ScalarFn f_sig = [&W](Tape& tape, Var x) { return sum(sigmoid(matmul(tape.constant(W), x))); };
  CHECK(grad_check(f_sig, random_tensor(Shape::vector(3), rng)) <= 1e-5);

  const Tensor x = random_tensor(Shape::vector(3), rng);
  const ScalarFn f_w = [&x](Tape& tape, Var w) {
    return sum(sigmoid(matmul(w, tape.constant(x))));
  };
  CHECK(grad_check(f_w, W) <= 1e-5);
}

TEST_CASE("every op passes the gradient check") {
  Rng rng(17);
  const Tensor other_vec = random_tensor(Shape::vector(4), rng);
  const Tensor other_mat = random_tensor(Shape::matrix(3, 4), rng);
  const Tensor rhs_mat = random_tensor(Shape::matrix(4, 2), rng);
  const Tensor table = random_tensor(Shape::matrix(5, 4), rng);

  struct Case {
    const char* name;
    ScalarFn f;
    Tensor x;
  };
  std::vector<Case> cases = {
      {"matmul left", [&](Tape& t, Var x) { return weighted_sum(t, matmul(x, t.constant(rhs_mat)), 1); },
       other_mat},
      {"matmul vector", [&](Tape& t, Var x) { return weighted_sum(t, matmul(t.constant(other_mat), x), 2); },
       other_vec},
      {"add", [&](Tape& t, Var x) { return weighted_sum(t, add(x, t.constant(other_vec)), 3); }, other_vec},
      {"sub", [&](Tape& t, Var x) { return weighted_sum(t, sub(t.constant(other_vec), x), 4); }, other_vec},
      {"mul", [&](Tape& t, Var x) { return weighted_sum(t, mul(x, x), 5); }, other_vec},
      {"scale", [&](Tape& t, Var x) { return weighted_sum(t, scale(x, -2.5), 6); }, other_vec},
      {"shift", [&](Tape& t, Var x) { return weighted_sum(t, shift(x, 0.3), 7); }, other_vec},
      {"concat",
       [&](Tape& t, Var x) {
         Var parts[] = {x, t.constant(other_vec), x};
         return weighted_sum(t, concat(parts), 8);
       },
       other_vec},
      {"slice", [&](Tape& t, Var x) { return weighted_sum(t, slice(x, 1, 2), 9); }, other_vec},
      {"tanh", [&](Tape& t, Var x) { return weighted_sum(t, tanh(x), 10); }, other_vec},
      {"sigmoid", [&](Tape& t, Var x) { return weighted_sum(t, sigmoid(x), 11); }, other_vec},
      {"exp", [&](Tape& t, Var x) { return weighted_sum(t, exp(x), 12); }, other_vec},
      {"log", [&](Tape& t, Var x) { return weighted_sum(t, log(x), 13); },
       random_tensor(Shape::vector(4), rng, 0.5, 2.0)},
      {"sum", [&](Tape&, Var x) { return scale(sum(x), 1.5); }, other_mat},
      {"softmax", [&](Tape& t, Var x) { return weighted_sum(t, softmax(x), 14); }, other_vec},
      {"log_softmax", [&](Tape& t, Var x) { return weighted_sum(t, log_softmax(x), 15); }, other_vec},
      {"pick", [&](Tape&, Var x) { return scale(pick(x, 2), 3.0); }, other_vec},
      {"embedding", [&](Tape& t, Var x) { return weighted_sum(t, add(embedding(x, 3), embedding(x, 1)), 16); },
       table},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    CHECK(grad_check(c.f, c.x) <= 1e-4);
  }
}

TEST_CASE("concat routes gradients to the right operands") {
  Tape tape;
  Var a = tape.variable(Tensor::vector({1.0, 2.0}));
  Var b = tape.variable(Tensor::vector({3.0}));
  Var c = concat(a, b);
  tape.backward(sum(mul(c, tape.constant(Tensor::vector({10.0, 20.0, 30.0})))));
  CHECK(a.grad().data() == (VectorXd(2) << 10, 20).finished());
  CHECK(b.grad()[0] == 30.0);
}

TEST_CASE("softmax is a distribution") {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    Tape tape;
    const Tensor x = random_tensor(Shape::vector(9), rng, -30.0, 30.0);
    const VectorXd p = softmax(tape.constant(x)).value().data();
    CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
    CHECK((p.array() >= 0.0).all());
    CHECK((p.array() <= 1.0).all());
    CHECK(std::abs(dialv::softmax(x.data()).sum() - 1.0) <= 1e-12);
  }
  Tape tape;
  const VectorXd big = softmax(tape.constant(Tensor::vector({1000.0, 1000.0}))).value().data();
  CHECK(big[0] == doctest::Approx(0.5));
}

TEST_CASE("concat then slice is the identity") {
  Rng rng(29);
  Tape tape;
  const Tensor a = random_tensor(Shape::vector(3), rng);
  const Tensor b = random_tensor(Shape::vector(5), rng);
  Var c = concat(tape.constant(a), tape.constant(b));
  CHECK(slice(c, 0, 3).value().data() == a.data());
  CHECK(slice(c, 3, 5).value().data() == b.data());
}

TEST_CASE("log_sum_exp and sigmoid are stable") {
  const VectorXd x = (VectorXd(3) << 1000.0, 1000.0, -1000.0).finished();
  CHECK(log_sum_exp(x) == doctest::Approx(1000.0 + std::log(2.0)));
  const VectorXd s = dialv::sigmoid((VectorXd(2) << -800.0, 800.0).finished());
  CHECK(s[0] == 0.0);
  CHECK(s[1] == 1.0);
}

TEST_CASE("shape and domain errors") {
  Tape tape;
  Var v3 = tape.constant(Tensor::vector({1, 2, 3}));
  Var v2 = tape.constant(Tensor::vector({1, 2}));
  Var m = tape.constant(Tensor(Shape::matrix(2, 2)));

  CHECK_THROWS_AS(add(v3, v2), ShapeError);
  CHECK_THROWS_AS(matmul(m, v3), ShapeError);
  CHECK_THROWS_AS(slice(v3, 2, 2), ShapeError);
  CHECK_THROWS_AS(pick(v3, 3), ShapeError);
  CHECK_THROWS_AS(embedding(m, 5), ShapeError);
  try {
    mul(v3, v2);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("mul") != std::string::npos);
    CHECK(msg.find("[3]") != std::string::npos);
    CHECK(msg.find("[2]") != std::string::npos);
  }
  CHECK_THROWS_AS(log(tape.constant(Tensor::vector({1.0, 0.0}))), DomainError);
  CHECK_THROWS_AS(log(tape.constant(Tensor::vector({-1.0}))), DomainError);

  Tape t2;
  Var x = t2.variable(Tensor::vector({1, 2}));
  CHECK_THROWS_AS(t2.backward(tanh(x)), UsageError);
}

TEST_CASE("gradient shapes mirror value shapes") {
  Rng rng(31);
  Tape tape;
  Var W = tape.variable(random_tensor(Shape::matrix(3, 2), rng));
  Var x = tape.variable(random_tensor(Shape::vector(2), rng));
  Var root = sum(tanh(matmul(W, x)));
  tape.backward(root);
  for (std::size_t id = 0; id < tape.size(); ++id) {
    CHECK(tape.grad(static_cast<std::int32_t>(id)).shape() == tape.value(static_cast<std::int32_t>(id)).shape());
  }
}

TEST_CASE("rng substreams are reproducible and distinct") {
  CHECK(derive_seed(1, "train", {3, 4}) == derive_seed(1, "train", {3, 4}));
  CHECK(derive_seed(1, "train", {3, 4}) != derive_seed(1, "train", {4, 3}));
  CHECK(derive_seed(1, "train") != derive_seed(2, "train"));
  Rng a(9), b(9);
  for (int i = 0; i < 10; ++i) CHECK(a.normal() == b.normal());
  Rng r(10);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(r.below(7) < 7);
  }
}
