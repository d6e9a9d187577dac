#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "hajscc/tensor.hpp"

namespace hajscc {

class Tape;

using NodeId = std::size_t;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  NodeId id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
};

/// What a backward rule sees: the output value and its gradient, the input
/// values, and gradient sinks for inputs. A sink is empty when that input
/// does not need a gradient, and rules must skip it.
struct GradContext {
  const Tensor& out;
  std::span<const double> out_grad;
  std::vector<const Tensor*> in;
  std::vector<std::span<double>> in_grad;
};

using BackwardRule = std::function<void(GradContext&)>;

/// Define-by-run reverse-mode tape.
///
/// Nodes are appended in evaluation order, so the node list is already a
/// topological order and backward() is a single reverse sweep. A fresh tape
/// is built for every forward pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Records a value that never receives a gradient.
  Var constant(Tensor value);

  /// Records a leaf bound to `param`. If param.requires_grad(), backward()
  /// accumulates into param.grad(). The tensor must outlive the tape.
  Var parameter(Tensor& param);

  /// Records an op output. `rule` is dropped when no input needs a gradient.
  Var record(Tensor value, std::vector<NodeId> inputs, BackwardRule rule);

  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  bool needs_grad(NodeId id) const { return nodes_.at(id).needs_grad; }

  /// Gradient of node `id` after backward(); empty if it never needed one.
  std::span<const double> grad(NodeId id) const { return nodes_.at(id).grad; }

  /// Reverse sweep from a scalar loss. Bound parameters receive
  /// d(loss)/d(param) added to their grad buffers.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::vector<NodeId> inputs;
    BackwardRule rule;
    Tensor* bound = nullptr;
    bool needs_grad = false;
    std::vector<double> grad;
  };

  std::vector<Node> nodes_;
};

}  // namespace hajscc
