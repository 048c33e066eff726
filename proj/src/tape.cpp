#include "dialv/tape.hpp"

#include <cmath>
#include <string>

#include "dialv/math.hpp"

namespace dialv {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Matmul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "elementwise-mul";
    case OpKind::Scale: return "scale";
    case OpKind::Shift: return "shift";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
    case OpKind::Tanh: return "tanh";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::Sum: return "sum";
    case OpKind::Softmax: return "softmax";
    case OpKind::LogSoftmax: return "log-softmax";
    case OpKind::Pick: return "pick";
    case OpKind::Embedding: return "embedding-lookup";
  }
  return "unknown";
}

namespace {

[[noreturn]] void shape_mismatch(OpKind kind, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op_name(kind)) + ": incompatible shapes " + a.str() + " and " +
                   b.str());
}

[[noreturn]] void bad_shape(OpKind kind, const Shape& a, const char* expected) {
  throw ShapeError(std::string(op_name(kind)) + ": operand of shape " + a.str() + ", expected " +
                   expected);
}

Tape& same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw UsageError("operands recorded on different tapes");
  return *a.tape;
}

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw UsageError("operand is not bound to a tape");
  return *a.tape;
}

Tape::Node unary(OpKind kind, Var a, Tensor value) {
  Tape::Node n;
  n.kind = kind;
  n.a = a.id;
  n.value = std::move(value);
  return n;
}

Tape::Node binary(OpKind kind, Var a, Var b, Tensor value) {
  Tape::Node n = unary(kind, a, std::move(value));
  n.b = b.id;
  return n;
}

Var elementwise(OpKind kind, Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (!(x.shape() == y.shape())) shape_mismatch(kind, x.shape(), y.shape());
  VectorXd out;
  switch (kind) {
    case OpKind::Add: out = x.data() + y.data(); break;
    case OpKind::Sub: out = x.data() - y.data(); break;
    case OpKind::Mul: out = x.data().cwiseProduct(y.data()); break;
    default: throw UsageError("not an elementwise binary op");
  }
  return t.push(binary(kind, a, b, Tensor(x.shape(), std::move(out))));
}

void require_vector(OpKind kind, const Shape& s) {
  if (!s.is_vector()) bad_shape(kind, s, "a vector");
}

}  // namespace

Var Tape::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::parameter(const Tensor& value) {
  Node n;
  n.borrowed = &value;
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::push(Node node) {
  if (node.kind != OpKind::Leaf) {
    bool needs = false;
    if (node.a >= 0) needs |= nodes_[static_cast<std::size_t>(node.a)].needs_grad;
    if (node.b >= 0) needs |= nodes_[static_cast<std::size_t>(node.b)].needs_grad;
    for (auto id : node.operands) needs |= nodes_[static_cast<std::size_t>(id)].needs_grad;
    node.needs_grad = needs;
  }
  nodes_.push_back(std::move(node));
  grads_.clear();
  return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

const Tensor& Tape::grad(std::int32_t id) const {
  if (grads_.empty()) throw UsageError("grad() requested before backward()");
  return grads_[static_cast<std::size_t>(id)];
}

void Tape::backward(Var root) {
  if (root.tape != this) throw UsageError("backward: root belongs to another tape");
  if (!value(root.id).shape().is_scalar()) {
    throw UsageError("backward: root must be scalar, got shape " + value(root.id).shape().str());
  }
  grads_.assign(nodes_.size(), Tensor());
  for (std::size_t i = 0; i < nodes_.size(); ++i) grads_[i] = Tensor(value(static_cast<std::int32_t>(i)).shape());
  grads_[static_cast<std::size_t>(root.id)][0] = 1.0;

  for (std::int32_t i = root.id; i >= 0; --i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || n.kind == OpKind::Leaf) continue;
    const VectorXd& dy = grads_[static_cast<std::size_t>(i)].data();
    if (dy.isZero(0.0)) continue;
    const Tensor& y = n.value;
    auto ga = [&]() -> Tensor& { return grads_[static_cast<std::size_t>(n.a)]; };
    auto gb = [&]() -> Tensor& { return grads_[static_cast<std::size_t>(n.b)]; };
    auto needs = [&](std::int32_t id) { return nodes_[static_cast<std::size_t>(id)].needs_grad; };

    switch (n.kind) {
      case OpKind::Leaf: break;
      case OpKind::Matmul: {
        const Tensor& a = value(n.a);
        const Tensor& b = value(n.b);
        const auto A = a.matrix();
        if (b.shape().is_vector()) {
          if (needs(n.a)) ga().matrix().noalias() += dy * b.data().transpose();
          if (needs(n.b)) gb().data().noalias() += A.transpose() * dy;
        } else {
          Eigen::Map<const RowMatrixXd> dY(dy.data(), y.shape().rows(), y.shape().cols());
          if (needs(n.a)) ga().matrix().noalias() += dY * b.matrix().transpose();
          if (needs(n.b)) gb().matrix().noalias() += A.transpose() * dY;
        }
        break;
      }
      case OpKind::Add:
        if (needs(n.a)) ga().data() += dy;
        if (needs(n.b)) gb().data() += dy;
        break;
      case OpKind::Sub:
        if (needs(n.a)) ga().data() += dy;
        if (needs(n.b)) gb().data() -= dy;
        break;
      case OpKind::Mul:
        if (needs(n.a)) ga().data() += dy.cwiseProduct(value(n.b).data());
        if (needs(n.b)) gb().data() += dy.cwiseProduct(value(n.a).data());
        break;
      case OpKind::Scale: ga().data() += n.constant * dy; break;
      case OpKind::Shift: ga().data() += dy; break;
      case OpKind::Concat: {
        Index offset = 0;
        for (auto id : n.operands) {
          const Index len = value(id).size();
          if (needs(id)) grads_[static_cast<std::size_t>(id)].data() += dy.segment(offset, len);
          offset += len;
        }
        break;
      }
      case OpKind::Slice: ga().data().segment(n.aux, y.size()) += dy; break;
      case OpKind::Tanh:
        ga().data().array() += dy.array() * (1.0 - y.data().array().square());
        break;
      case OpKind::Sigmoid:
        ga().data().array() += dy.array() * y.data().array() * (1.0 - y.data().array());
        break;
      case OpKind::Exp: ga().data().array() += dy.array() * y.data().array(); break;
      case OpKind::Log: ga().data().array() += dy.array() / value(n.a).data().array(); break;
      case OpKind::Sum: ga().data().array() += dy[0]; break;
      case OpKind::Softmax: {
        const double dot = dy.dot(y.data());
        ga().data().array() += y.data().array() * (dy.array() - dot);
        break;
      }
      case OpKind::LogSoftmax: {
        const double total = dy.sum();
        ga().data().array() += dy.array() - y.data().array().exp() * total;
        break;
      }
      case OpKind::Pick: ga()[n.aux] += dy[0]; break;
      case OpKind::Embedding: ga().matrix().row(n.aux) += dy.transpose(); break;
    }
  }
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (!x.shape().is_matrix()) bad_shape(OpKind::Matmul, x.shape(), "a matrix");
  if (x.shape().cols() != y.shape().rows()) shape_mismatch(OpKind::Matmul, x.shape(), y.shape());
  Tensor out;
  if (y.shape().is_vector()) {
    out = Tensor::from_vector(x.matrix() * y.data());
  } else {
    out = Tensor::from_matrix(x.matrix() * y.matrix());
  }
  return t.push(binary(OpKind::Matmul, a, b, std::move(out)));
}

Var add(Var a, Var b) { return elementwise(OpKind::Add, a, b); }
Var sub(Var a, Var b) { return elementwise(OpKind::Sub, a, b); }
Var mul(Var a, Var b) { return elementwise(OpKind::Mul, a, b); }

Var scale(Var a, double factor) {
  const Tensor& x = a.value();
  Tape::Node n = unary(OpKind::Scale, a, Tensor(x.shape(), factor * x.data()));
  n.constant = factor;
  return tape_of(a).push(std::move(n));
}

Var shift(Var a, double offset) {
  const Tensor& x = a.value();
  Tape::Node n = unary(OpKind::Shift, a, Tensor(x.shape(), (x.data().array() + offset).matrix()));
  n.constant = offset;
  return tape_of(a).push(std::move(n));
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat: no operands");
  Tape& t = tape_of(parts[0]);
  Index total = 0;
  for (const Var& p : parts) {
    if (p.tape != &t) throw UsageError("operands recorded on different tapes");
    require_vector(OpKind::Concat, p.shape());
    total += p.value().size();
  }
  VectorXd out(total);
  Tape::Node n;
  n.kind = OpKind::Concat;
  Index offset = 0;
  for (const Var& p : parts) {
    out.segment(offset, p.value().size()) = p.value().data();
    offset += p.value().size();
    n.operands.push_back(p.id);
  }
  n.value = Tensor(Shape::vector(total), std::move(out));
  return t.push(std::move(n));
}

Var concat(Var a, Var b) {
  const Var parts[] = {a, b};
  return concat(parts);
}

Var slice(Var a, Index offset, Index length) {
  const Tensor& x = a.value();
  require_vector(OpKind::Slice, x.shape());
  if (offset < 0 || length < 0 || offset + length > x.size()) {
    throw ShapeError("slice: range [" + std::to_string(offset) + ", " +
                     std::to_string(offset + length) + ") outside shape " + x.shape().str());
  }
  Tape::Node n = unary(OpKind::Slice, a, Tensor::from_vector(x.data().segment(offset, length)));
  n.aux = offset;
  return tape_of(a).push(std::move(n));
}

Var tanh(Var a) {
  const Tensor& x = a.value();
  return tape_of(a).push(unary(OpKind::Tanh, a, Tensor(x.shape(), x.data().array().tanh().matrix())));
}

Var sigmoid(Var a) {
  const Tensor& x = a.value();
  return tape_of(a).push(unary(OpKind::Sigmoid, a, Tensor(x.shape(), dialv::sigmoid(x.data()))));
}

Var exp(Var a) {
  const Tensor& x = a.value();
  return tape_of(a).push(unary(OpKind::Exp, a, Tensor(x.shape(), x.data().array().exp().matrix())));
}

Var log(Var a) {
  const Tensor& x = a.value();
  if ((x.data().array() <= 0.0).any()) {
    throw DomainError("log: non-positive entry in operand of shape " + x.shape().str());
  }
  return tape_of(a).push(unary(OpKind::Log, a, Tensor(x.shape(), x.data().array().log().matrix())));
}

Var sum(Var a) {
  return tape_of(a).push(unary(OpKind::Sum, a, Tensor::scalar(a.value().data().sum())));
}

Var softmax(Var a) {
  const Tensor& x = a.value();
  require_vector(OpKind::Softmax, x.shape());
  if (x.size() == 0) bad_shape(OpKind::Softmax, x.shape(), "a non-empty vector");
  return tape_of(a).push(unary(OpKind::Softmax, a, Tensor::from_vector(dialv::softmax(x.data()))));
}

Var log_softmax(Var a) {
  const Tensor& x = a.value();
  require_vector(OpKind::LogSoftmax, x.shape());
  if (x.size() == 0) bad_shape(OpKind::LogSoftmax, x.shape(), "a non-empty vector");
  return tape_of(a).push(
      unary(OpKind::LogSoftmax, a, Tensor::from_vector(dialv::log_softmax(x.data()))));
}

Var pick(Var a, Index index) {
  const Tensor& x = a.value();
  require_vector(OpKind::Pick, x.shape());
  if (index < 0 || index >= x.size()) {
    throw ShapeError("pick: index " + std::to_string(index) + " outside shape " + x.shape().str());
  }
  Tape::Node n = unary(OpKind::Pick, a, Tensor::scalar(x[index]));
  n.aux = index;
  return tape_of(a).push(std::move(n));
}

Var embedding(Var table, Index id) {
  const Tensor& e = table.value();
  if (!e.shape().is_matrix()) bad_shape(OpKind::Embedding, e.shape(), "a matrix");
  if (id < 0 || id >= e.shape().rows()) {
    throw ShapeError("embedding-lookup: id " + std::to_string(id) + " outside table " +
                     e.shape().str());
  }
  Tape::Node n = unary(OpKind::Embedding, table, Tensor::from_vector(e.matrix().row(id).transpose()));
  n.aux = id;
  return tape_of(table).push(std::move(n));
}

}  // namespace dialv
