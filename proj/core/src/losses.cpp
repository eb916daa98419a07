#include "idv/losses.hpp"

#include <cmath>

#include "idv/error.hpp"
#include "idv/ops.hpp"

namespace idv {

std::string to_string(LossMode mode) {
  switch (mode) {
    case LossMode::IdentVerif: return "I+V";
    case LossMode::Ident: return "I";
    case LossMode::Verif: return "V";
    case LossMode::Contrastive: return "contrastive";
  }
  return "?";
}

LossMode parse_loss_mode(const std::string& text) {
  if (text == "I+V" || text == "IV") return LossMode::IdentVerif;
  if (text == "I") return LossMode::Ident;
  if (text == "V") return LossMode::Verif;
  if (text == "contrastive") return LossMode::Contrastive;
  throw InvalidArgument("unknown loss mode '" + text + "' (expected I+V, I, V or contrastive)");
}

LossWeights effective_weights(LossMode mode, const LossWeights& weights) {
  if (weights.verification < 0.0 || weights.identification < 0.0) {
    throw InvalidArgument("loss weights must be non-negative");
  }
  switch (mode) {
    case LossMode::Ident: return {0.0, weights.identification};
    case LossMode::Verif: return {weights.verification, 0.0};
    default: return weights;
  }
}

Var identification_loss(Var probs, std::size_t target) {
  if (target >= probs.value().size()) {
    throw InvalidArgument("identification_loss: target " + std::to_string(target) +
                          " out of range for K=" + std::to_string(probs.value().size()));
  }
  return neg_log_at(probs, target);
}

Var verification_loss(Var q, bool same) {
  if (q.value().size() != 2) {
    throw InvalidArgument("verification_loss: expected 2 probabilities, got " +
                          shape_string(q.shape()));
  }
  return neg_log_at(q, same ? 0 : 1);
}

Var contrastive_loss(Var f1, Var f2, bool same, double margin) {
  if (!(margin > 0.0)) throw InvalidArgument("contrastive_loss: margin must be positive");
  if (&f1.graph() != &f2.graph()) {
    throw InvalidArgument("contrastive_loss: operands belong to different graphs");
  }
  const Tensor& a = f1.value();
  const Tensor& b = f2.value();
  if (a.shape() != b.shape()) {
    throw InvalidArgument("contrastive_loss: shape " + shape_string(a.shape()) + " vs " +
                          shape_string(b.shape()));
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sq += d * d;
  }
  const double dist = std::sqrt(sq);
  const bool hinge_active = !same && dist < margin;
  double value = 0.0;
  if (same) {
    value = sq;
  } else if (hinge_active) {
    value = (margin - dist) * (margin - dist);
  }
  Graph& g = f1.graph();
  if (g.tracking_branches() && !same) g.note_branch(hinge_active ? 1 : 2);

  // dL/df1 = coef * (f1 - f2); dL/df2 = -coef * (f1 - f2).
  double coef = 0.0;
  if (same) {
    coef = 2.0;
  } else if (hinge_active && dist > 0.0) {
    coef = -2.0 * (margin - dist) / dist;
  }
  const std::size_t a_id = f1.id(), b_id = f2.id();
  return g.record("contrastive", Tensor::scalar(value), {f1, f2},
                  [a_id, b_id, coef](Graph& graph, std::size_t self) {
    if (coef == 0.0) return;
    const double go = graph.grad(self)[0];
    const Tensor& a = graph.value(a_id);
    const Tensor& b = graph.value(b_id);
    double* ga = graph.requires_grad(a_id) ? graph.grad_mut(a_id).data() : nullptr;
    double* gb = graph.requires_grad(b_id) ? graph.grad_mut(b_id).data() : nullptr;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double g = go * coef * (a[i] - b[i]);
      if (ga) ga[i] += g;
      if (gb) gb[i] -= g;
    }
  });
}

namespace {

Var accumulate(Var total, Var term, double weight) {
  Var weighted = weight == 1.0 ? term : scale(term, weight);
  return total.valid() ? add(total, weighted) : weighted;
}

}  // namespace

Var combined_objective(Var p1, Var p2, Var q, std::size_t t1, std::size_t t2, bool same,
                       const LossWeights& weights) {
  if (weights.verification < 0.0 || weights.identification < 0.0) {
    throw InvalidArgument("loss weights must be non-negative");
  }
  Var total;
  if (weights.verification != 0.0) {
    total = accumulate(total, verification_loss(q, same), weights.verification);
  }
  if (weights.identification != 0.0) {
    total = accumulate(total, identification_loss(p1, t1), weights.identification);
    total = accumulate(total, identification_loss(p2, t2), weights.identification);
  }
  if (!total.valid()) total = p1.graph().input(Tensor::scalar(0.0));
  return total;
}

PairObjective pair_objective(const PairOutput& out, const PairLabels& labels, LossMode mode,
                             const LossWeights& weights, double margin) {
  const LossWeights w = effective_weights(mode, weights);
  PairObjective obj;
  Var total;
  if (mode != LossMode::Contrastive && w.verification != 0.0) {
    obj.verification = verification_loss(out.q, labels.same());
    total = accumulate(total, obj.verification, w.verification);
  }
  if (mode == LossMode::Contrastive && w.verification != 0.0) {
    obj.contrastive = contrastive_loss(out.f1, out.f2, labels.same(), margin);
    total = accumulate(total, obj.contrastive, w.verification);
  }
  if (w.identification != 0.0) {
    obj.ident1 = identification_loss(out.p1, labels.t1);
    obj.ident2 = identification_loss(out.p2, labels.t2);
    total = accumulate(total, obj.ident1, w.identification);
    total = accumulate(total, obj.ident2, w.identification);
  }
  if (!total.valid()) total = out.p1.graph().input(Tensor::scalar(0.0));
  obj.total = total;
  return obj;
}

}  // namespace idv
