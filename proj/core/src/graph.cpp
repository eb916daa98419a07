#include "idv/graph.hpp"

#include "idv/error.hpp"
#include "idv/rng.hpp"

namespace idv {

const Tensor& Var::value() const { return graph_->value(id_); }
const Tensor& Var::grad() const { return graph_->grad(id_); }

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::input(Tensor value) {
  Node n;
  n.op = "input";
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::variable(Tensor value) {
  Node n;
  n.op = "variable";
  n.value = std::move(value);
  n.requires_grad = true;
  n.keep_grad = true;
  return push(std::move(n));
}

Var Graph::param(const Parameter& p) {
  if (auto it = param_leaves_.find(&p); it != param_leaves_.end()) {
    return Var(this, it->second);
  }
  Node n;
  n.op = "param:" + p.name;
  n.external = &p.value;
  n.param = &p;
  n.requires_grad = true;
  n.keep_grad = true;
  Var v = push(std::move(n));
  param_leaves_.emplace(&p, v.id());
  return v;
}

Var Graph::record(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
                  BackwardFn backward) {
  Node n;
  n.op = std::string(op);
  n.value = std::move(value);
  for (const Var& in : inputs) {
    if (in.graph_ != this) {
      throw InvalidArgument(n.op + ": input belongs to a different graph");
    }
    n.requires_grad = n.requires_grad || nodes_[in.id_].requires_grad;
    n.inputs.push_back(in.id_);
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

const Tensor& Graph::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : n.value;
}

const Tensor& Graph::grad(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (n.grad.empty()) {
    throw InvalidArgument("no gradient recorded for node " + n.op + "#" +
                          std::to_string(id));
  }
  return n.grad;
}

Tensor& Graph::grad_mut(std::size_t id) {
  Node& n = nodes_.at(id);
  if (n.grad.empty()) n.grad = Tensor(value(id).shape(), 0.0);
  n.touched = true;
  return n.grad;
}

void Graph::backward(Var loss, double seed) {
  if (loss.graph_ != this) throw InvalidArgument("backward: loss belongs to a different graph");
  const Tensor& lv = value(loss.id_);
  if (lv.size() != 1) {
    throw InvalidArgument("backward requires a scalar loss, got shape " +
                          shape_string(lv.shape()));
  }
  for (auto& n : nodes_) {
    n.touched = false;
    if (n.requires_grad) {
      if (n.grad.empty()) {
        n.grad = Tensor(n.external ? n.external->shape() : n.value.shape(), 0.0);
      } else {
        n.grad.fill(0.0);
      }
    }
  }
  if (!nodes_[loss.id_].requires_grad) return;
  grad_mut(loss.id_)[0] = seed;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.touched || !n.backward) continue;
    n.backward(*this, i);
  }
}

void Graph::backward(Var loss, ParamStore& store, double seed) {
  backward(loss, seed);
  accumulate_param_grads(store);
}

void Graph::accumulate_param_grads(ParamStore& store) const {
  for (const auto& [param, id] : param_leaves_) {
    (void)id;
    if (param->index >= store.size() || &store.at(param->index) != param) {
      throw InvalidArgument("parameter '" + param->name +
                            "' is not owned by the target ParamStore");
    }
  }
  // Walk nodes (not the hash map) so accumulation order is fixed.
  for (const auto& n : nodes_) {
    if (!n.param || !n.touched) continue;
    add_into(store.at(n.param->index).grad, n.grad);
  }
}

void Graph::accumulate_param_grads(ParamGrads& grads) const {
  for (const auto& n : nodes_) {
    if (!n.param || !n.touched) continue;
    if (n.param->index >= grads.size()) {
      throw InvalidArgument("gradient buffer too small for parameter '" + n.param->name + "'");
    }
    add_into(grads[n.param->index], n.grad);
  }
}

void Graph::note_branch(std::uint64_t decision) {
  branch_signature_ = mix64(branch_signature_ ^ (decision + 0x9e3779b97f4a7c15ULL));
}

std::optional<std::string> Graph::first_nonfinite() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!value(i).all_finite()) return nodes_[i].op + "#" + std::to_string(i);
  }
  return std::nullopt;
}

}  // namespace idv
