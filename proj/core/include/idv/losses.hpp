#pragma once

#include <cstddef>
#include <string>

#include "idv/graph.hpp"
#include "idv/model.hpp"

namespace idv {

/// Per-objective weights. The verification loss gets `verification`, each
/// of the two identification losses gets `identification`.
struct LossWeights {
  double verification = 1.0;
  double identification = 0.5;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

enum class LossMode {
  IdentVerif,   // "I+V": both identification losses and the verification loss
  Ident,        // "I": identification losses only
  Verif,        // "V": verification loss only
  Contrastive,  // identification losses plus contrastive loss on raw f1, f2
};

std::string to_string(LossMode mode);
LossMode parse_loss_mode(const std::string& text);

/// Weights actually applied for a mode: I zeroes the verification weight,
/// V zeroes the identification weight.
LossWeights effective_weights(LossMode mode, const LossWeights& weights);

/// Cross-entropy against a one-hot target: -log(probs[target]).
Var identification_loss(Var probs, std::size_t target);

/// -log(q[0]) for a same-identity pair, -log(q[1]) otherwise.
Var verification_loss(Var q, bool same);

/// d = ||f1 - f2||; d^2 for same pairs, max(0, margin - d)^2 otherwise.
Var contrastive_loss(Var f1, Var f2, bool same, double margin);

/// w_v * Verif(q, s) + w_i * Identif(p1, t1) + w_i * Identif(p2, t2). Terms
/// whose weight is exactly zero are left out of the graph.
Var combined_objective(Var p1, Var p2, Var q, std::size_t t1, std::size_t t2, bool same,
                       const LossWeights& weights);

struct PairLabels {
  std::size_t t1 = 0;
  std::size_t t2 = 0;
  bool same() const { return t1 == t2; }
};

/// Loss terms of one pair under a training mode. `total` is the weighted
/// sum; the unweighted components are kept for logging (invalid Var when a
/// component is not part of the mode).
struct PairObjective {
  Var total;
  Var verification;
  Var ident1;
  Var ident2;
  Var contrastive;
};

PairObjective pair_objective(const PairOutput& out, const PairLabels& labels, LossMode mode,
                             const LossWeights& weights, double margin);

}  // namespace idv
