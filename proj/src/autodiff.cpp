#include "hajscc/autodiff.hpp"

#include <fmt/format.h>

#include "hajscc/errors.hpp"

namespace hajscc {

const Tensor& Var::value() const {
  if (!tape) throw ContractError("Var is not attached to a tape");
  return tape->value(id);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(Tensor& param) {
  Node node;
  node.value = param;
  node.bound = &param;
  node.needs_grad = param.requires_grad();
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<NodeId> inputs, BackwardRule rule) {
  Node node;
  node.value = std::move(value);
  for (NodeId in : inputs) {
    if (in >= nodes_.size()) {
      throw ContractError(fmt::format("op input node {} not on tape", in));
    }
    node.needs_grad = node.needs_grad || nodes_[in].needs_grad;
  }
  node.inputs = std::move(inputs);
  if (node.needs_grad) node.rule = std::move(rule);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ContractError("loss belongs to a different tape");
  Node& root = nodes_.at(loss.id);
  if (root.value.size() != 1) {
    throw ContractError(fmt::format("backward needs a scalar loss, got shape {}",
                                    shape_str(root.value.shape())));
  }
  for (Node& n : nodes_) {
    if (n.needs_grad) n.grad.assign(n.value.size(), 0.0);
  }
  if (!root.needs_grad) return;
  root.grad[0] = 1.0;

  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.needs_grad) continue;
    if (node.bound) {
      auto sink = node.bound->ensure_grad();
      for (std::size_t k = 0; k < sink.size(); ++k) sink[k] += node.grad[k];
      continue;
    }
    if (!node.rule) continue;
    GradContext ctx{node.value, node.grad, {}, {}};
    ctx.in.reserve(node.inputs.size());
    ctx.in_grad.reserve(node.inputs.size());
    for (NodeId in : node.inputs) {
      Node& src = nodes_[in];
      ctx.in.push_back(&src.value);
      ctx.in_grad.push_back(src.needs_grad ? std::span<double>(src.grad)
                                           : std::span<double>());
    }
    node.rule(ctx);
  }
}

}  // namespace hajscc
