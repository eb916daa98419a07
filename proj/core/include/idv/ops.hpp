#pragma once

#include <cstddef>

#include "idv/graph.hpp"
#include "idv/rng.hpp"

namespace idv {

/// 2-D cross-correlation. `input` is [C_in,H,W] or [N,C_in,H,W]; `weight`
/// is [C_out,C_in,kH,kW]; `bias` is [C_out]. Output spatial size is
/// floor((H + 2*padding - kH) / stride) + 1, zero padding.
Var conv2d(Var input, Var weight, Var bias, std::size_t stride = 1, std::size_t padding = 0);

Var relu(Var x);

/// 2x2 window max with stride 2 on [C,H,W]; H and W must be even. Ties go to
/// the first element in row-major window order, and so does the gradient.
Var maxpool2(Var x);

/// Per-channel spatial max of [C,H,W] -> [C] (MAC pooling). Same tie rule as
/// maxpool2.
Var global_max_pool(Var x);

/// weight[D_out,D_in] * x[D_in] + bias[D_out].
Var linear(Var x, Var weight, Var bias);

/// Numerically stable softmax over a vector of K >= 2 logits.
Var softmax(Var logits);

/// Inverted dropout. In training mode each element is zeroed with
/// probability `rate` and survivors are scaled by 1/(1-rate); otherwise (and
/// for rate 0) `x` is returned unchanged. The mask is drawn from `rng`.
Var dropout(Var x, double rate, bool training, Rng& rng);

/// Square Layer: elementwise (a - b)^2.
Var square_diff(Var a, Var b);

Var flatten(Var x);
Var sum(Var x);
Var add(Var a, Var b);
Var scale(Var x, double factor);
Var square(Var x);

/// -log(probs[index]) as a scalar.
Var neg_log_at(Var probs, std::size_t index);

}  // namespace idv
