#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "omnisynth/diff/tensor.hpp"

namespace omnisynth::diff {

enum class Op {
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  Scale,
  AddScalar,
  MatMul,
  Relu,
  LeakyRelu,
  Sigmoid,
  Exp,
  Log,
  Sin,
  Cos,
  Abs,
  Softplus,
  Sum,
  SumAxis,
  Mean,
  Concat,
  Slice,
  Reshape,
  Transpose,
  Conv2dCircular,
  Softmax,
  AvgPool2,
  Upsample2,
  RollChannels,
  Dense,
  Custom,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::MatMul: return "matmul";
    case Op::Relu: return "relu";
    case Op::LeakyRelu: return "leaky_relu";
    case Op::Sigmoid: return "sigmoid";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Abs: return "abs";
    case Op::Softplus: return "softplus";
    case Op::Sum: return "sum";
    case Op::SumAxis: return "sum_axis";
    case Op::Mean: return "mean";
    case Op::Concat: return "concat";
    case Op::Slice: return "slice";
    case Op::Reshape: return "reshape";
    case Op::Transpose: return "transpose";
    case Op::Conv2dCircular: return "conv2d_circular";
    case Op::Softmax: return "softmax";
    case Op::AvgPool2: return "avg_pool2";
    case Op::Upsample2: return "upsample2";
    case Op::RollChannels: return "roll_channels";
    case Op::Dense: return "dense";
    case Op::Custom: return "custom";
  }
  return "?";
}

template <class T>
class Tape;

/// Handle to a value recorded on a tape.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(id); }
  const Shape& shape() const { return tape->value(id).shape; }
  std::size_t size() const { return tape->value(id).size(); }
};

/// Append-only record of primitive operations. Insertion order is a
/// topological order, so backward is a single reverse sweep.
template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  struct Node {
    Op op = Op::Leaf;
    Tensor<T> value;
    Buffer<T> grad;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(Tensor<T> value, bool requires_grad = true) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

  /// Records an op result. The backward function is kept only when some
  /// input needs a gradient. Non-finite outputs are rejected.
  Var<T> record(Op op, Tensor<T> value, std::vector<std::size_t> inputs, BackwardFn backward) {
    if (!value.all_finite()) throw NonFiniteError(std::string("non-finite result in ") + op_name(op));
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    for (std::size_t i : n.inputs) n.requires_grad = n.requires_grad || nodes_.at(i).requires_grad;
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient accumulator of a node, zero-initialised on first access.
  Buffer<T>& grad_buffer(std::size_t id) {
    Node& n = nodes_.at(id);
    if (n.grad.empty()) n.grad.assign(n.value.size(), T(0));
    return n.grad;
  }

  /// Incoming gradient of a node (empty when nothing flowed into it).
  const Buffer<T>& grad_of(std::size_t id) const { return nodes_.at(id).grad; }

  Tensor<T> gradient(Var<T> v) const {
    const Node& n = nodes_.at(v.id);
    if (n.grad.empty()) return Tensor<T>(n.value.shape, T(0));
    return Tensor<T>(n.value.shape, n.grad);
  }

  /// Reverse sweep from a scalar output.
  void backward(Var<T> output) {
    const Node& out = nodes_.at(output.id);
    if (out.value.size() != 1)
      throw InvalidArgument("backward needs a scalar output, got shape " + shape_string(out.value.shape));
    for (auto& n : nodes_) n.grad.clear();
    if (!out.requires_grad) return;
    grad_buffer(output.id)[0] = T(1);
    for (std::size_t i = output.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
      n.backward(*this, i);
    }
  }

 private:
  std::vector<Node> nodes_;
};

}  // namespace omnisynth::diff
