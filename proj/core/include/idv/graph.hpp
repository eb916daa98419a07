#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "idv/param_store.hpp"
#include "idv/tensor.hpp"

namespace idv {

class Graph;

/// Handle to a node recorded on a Graph. Cheap to copy; only valid while the
/// graph that produced it is alive.
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in forward order; backward walks
/// them in exactly the reverse of that order, so gradients are a
/// deterministic function of the recorded computation.
class Graph {
 public:
  /// Called during backward with the graph and the id of the node whose
  /// output gradient is ready. Must add into input gradients via grad_mut.
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf that never receives a gradient.
  Var input(Tensor value);
  /// Leaf whose gradient is kept and readable after backward.
  Var variable(Tensor value);
  /// Leaf bound to a parameter. The parameter's value is referenced, not
  /// copied, and repeated calls with the same parameter return the same Var.
  Var param(const Parameter& p);

  Var record(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
             BackwardFn backward);

  const Tensor& value(std::size_t id) const;
  const Tensor& grad(std::size_t id) const;
  Tensor& grad_mut(std::size_t id);
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  const std::string& op_name(std::size_t id) const { return nodes_.at(id).op; }
  /// Ids of the nodes a recorded op was computed from, in call order.
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_.at(id).inputs; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = seed and propagates to every node that
  /// requires a gradient. Node gradients are reset at the start of each
  /// call; parameter gradients are only touched by accumulate_param_grads.
  void backward(Var loss, double seed = 1.0);
  /// backward() followed by accumulate_param_grads(store).
  void backward(Var loss, ParamStore& store, double seed = 1.0);

  /// Adds leaf gradients into the bound parameters' grad buffers (+=).
  void accumulate_param_grads(ParamStore& store) const;
  void accumulate_param_grads(ParamGrads& grads) const;

  // Non-smooth ops (ReLU masks, pooling argmax, hinges) report their
  // discrete decisions here when tracking is on. Two forward passes with
  // equal signatures took the same piecewise-smooth branch.
  void set_track_branches(bool on) { track_branches_ = on; }
  bool tracking_branches() const { return track_branches_; }
  void note_branch(std::uint64_t decision);
  std::uint64_t branch_signature() const { return branch_signature_; }

  /// "op#id" of the first node whose value holds NaN or Inf.
  std::optional<std::string> first_nonfinite() const;

 private:
  struct Node {
    std::string op;
    Tensor value;
    const Tensor* external = nullptr;
    const Parameter* param = nullptr;
    Tensor grad;
    bool requires_grad = false;
    bool keep_grad = false;
    bool touched = false;
    BackwardFn backward;
    std::vector<std::size_t> inputs;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_leaves_;
  bool track_branches_ = false;
  std::uint64_t branch_signature_ = 0;
};

}  // namespace idv
