#include "parp/autonet/tape.hpp"

#include "parp/error.hpp"

namespace parp::autonet {

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), nullptr, nullptr, false});
  return Var{nodes_.size() - 1};
}

Var Tape::param(Param& p) {
  nodes_.push_back(Node{p.value, Tensor(), nullptr, &p, true});
  return Var{nodes_.size() - 1};
}

Var Tape::push(Tensor value, Backward backward) {
  nodes_.push_back(Node{std::move(value), Tensor(), std::move(backward), nullptr, true});
  return Var{nodes_.size() - 1};
}

Tensor& Tape::grad(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.empty()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

void Tape::backward(Var loss) {
  if (nodes_[loss.id].value.size() != 1) throw InputError("backward needs a scalar loss");
  grad(loss)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    auto& node = nodes_[id];
    if (node.grad.empty()) continue;
    if (node.backward) {
      node.backward(*this, id);
    } else if (node.param) {
      auto& pg = node.param->grad;
      for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += node.grad[i];
    }
  }
}

}  // namespace parp::autonet
