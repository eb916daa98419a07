#pragma once

// Independent reference implementations used to check the library. They
// favour obviousness over speed and share no code with core/.

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "idv/tensor.hpp"

namespace idv::oracle {

/// Direct nested-loop cross-correlation of [Cin,H,W] with [Cout,Cin,kH,kW].
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding);

/// 2x2 stride-2 window max.
Tensor maxpool2(const Tensor& input);

/// Per-channel max over H and W.
Tensor channel_max(const Tensor& input);

/// Central difference of f with respect to every element of x.
Tensor numeric_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h);

/// AP straight from the definition: drop junk, then average precision@k
/// over the positions k that hold a relevant item. flags: 1 relevant,
/// 0 irrelevant, -1 junk.
std::optional<double> average_precision(const std::vector<int>& flags);

/// 1 if the first non-junk relevant item sits at rank <= k.
double cmc_at(const std::vector<int>& flags, std::size_t k);

/// Gallery indices sorted by ascending Euclidean distance to q, ties by index.
std::vector<std::size_t> euclidean_order(const std::vector<double>& q,
                                         const std::vector<std::vector<double>>& gallery);

}  // namespace idv::oracle
