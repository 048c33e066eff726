#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "dialv/tensor.hpp"

namespace dialv {

enum class OpKind : std::uint8_t {
  Leaf,
  Matmul,
  Add,
  Sub,
  Mul,
  Scale,
  Shift,
  Concat,
  Slice,
  Tanh,
  Sigmoid,
  Exp,
  Log,
  Sum,
  Softmax,
  LogSoftmax,
  Pick,
  Embedding,
};

std::string_view op_name(OpKind kind);

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::int32_t id = -1;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const { return tape != nullptr && id >= 0; }
};

/// Reverse-mode autodiff tape. Nodes are appended in evaluation order, so
/// the node sequence is always topologically sorted. A tape is built for one
/// example and discarded; it is not safe to share during construction.
class Tape {
 public:
  struct Node {
    OpKind kind = OpKind::Leaf;
    std::int32_t a = -1;
    std::int32_t b = -1;
    std::vector<std::int32_t> operands;  // Concat only
    Tensor value;
    const Tensor* borrowed = nullptr;
    Index aux = 0;
    double constant = 0.0;
    bool needs_grad = false;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that receives a gradient.
  Var variable(Tensor value);
  /// Leaf excluded from differentiation.
  Var constant(Tensor value);
  /// Leaf that reads `value` in place and receives a gradient. The tensor
  /// must outlive the tape.
  Var parameter(const Tensor& value);

  const Tensor& value(std::int32_t id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.borrowed ? *n.borrowed : n.value;
  }
  const Node& node(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }

  /// Appends a computed node. Used by the op functions below.
  Var push(Node node);

  /// Accumulates d(root)/d(node) for every node recorded before root.
  void backward(Var root);

  bool has_gradients() const { return !grads_.empty(); }
  const Tensor& grad(std::int32_t id) const;

 private:
  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

inline const Tensor& Var::value() const { return tape->value(id); }
inline const Tensor& Var::grad() const { return tape->grad(id); }

// Ops. Each records one node and returns its handle.

/// Matrix product. `a` is [m x k]; `b` is [k x n] or a length-k vector.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// Adds a constant to every element.
Var shift(Var a, double offset);
/// Concatenates vectors end to end.
Var concat(std::span<const Var> parts);
Var concat(Var a, Var b);
Var slice(Var a, Index offset, Index length);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var sum(Var a);
Var softmax(Var a);
Var log_softmax(Var a);
/// Scalar element `index` of a vector.
Var pick(Var a, Index index);
/// Row `id` of an embedding table, as a vector.
Var embedding(Var table, Index id);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator-(Var a) { return scale(a, -1.0); }
inline Var operator*(double c, Var a) { return scale(a, c); }

/// Affine map W x + b.
inline Var affine(Var weight, Var input, Var bias) { return add(matmul(weight, input), bias); }

}  // namespace dialv
