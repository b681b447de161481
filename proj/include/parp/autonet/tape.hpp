#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "parp/autonet/param_store.hpp"
#include "parp/tensor.hpp"

namespace parp::autonet {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id;
};

/// Reverse-mode tape. Ops append nodes in evaluation order; backward() walks
/// them in reverse and finally adds leaf gradients into their Params.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Var constant(Tensor value);
  /// Leaf bound to a parameter; its gradient is accumulated into `p.grad`.
  Var param(Param& p);
  Var push(Tensor value, Backward backward);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient buffer for a node, allocated on first use.
  Tensor& grad(Var v) { return grad(v.id); }
  Tensor& grad(std::size_t id);
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

  /// Seeds d(loss)/d(loss) = 1 for a 1-element node and propagates.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward backward;
    Param* param = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

}  // namespace parp::autonet
