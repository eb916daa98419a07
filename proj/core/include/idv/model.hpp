#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "idv/graph.hpp"
#include "idv/param_store.hpp"
#include "idv/rng.hpp"
#include "idv/tensor.hpp"

namespace idv {

/// One backbone stage: conv (odd square kernel, same padding) + ReLU,
/// optionally followed by a 2x2 max-pool.
struct StageSpec {
  std::size_t channels = 16;
  std::size_t kernel = 3;
  bool pool = true;

  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

enum class PoolingMode {
  FixedFlatten,  // flatten the last stage and map to D; input size is fixed
  Mac,           // per-channel global max, then map to D; any legal size
};

struct ModelConfig {
  std::size_t input_channels = 3;
  std::size_t input_size = 32;
  std::vector<StageSpec> backbone{{16, 3, true}, {32, 3, true}, {64, 3, false}};
  std::size_t embedding_dim = 64;
  std::size_t num_identities = 2;
  double dropout_rate = 0.5;
  PoolingMode pooling = PoolingMode::FixedFlatten;

  void validate() const;
  std::size_t pool_count() const;
  /// Spatial size of the last stage for an input of side `input_side`.
  std::size_t output_side(std::size_t input_side) const;
  /// Input side must be a multiple of this (and at least this large).
  std::size_t size_granularity() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

std::string to_string(PoolingMode mode);
PoolingMode parse_pooling_mode(const std::string& text);

/// Siamese identification + verification network. A single ParamStore holds
/// the shared backbone and embedding, the identity head (used by both
/// branches) and the verification head.
struct IdvModel {
  ModelConfig config;
  ParamStore params;
};

namespace param_names {
std::string conv_weight(std::size_t stage);
std::string conv_bias(std::size_t stage);
inline constexpr const char* kEmbedWeight = "embed.weight";
inline constexpr const char* kEmbedBias = "embed.bias";
inline constexpr const char* kIdentWeight = "ident.weight";
inline constexpr const char* kIdentBias = "ident.bias";
inline constexpr const char* kVerifWeight = "verif.weight";
inline constexpr const char* kVerifBias = "verif.bias";
}  // namespace param_names

/// He-normal weights (std sqrt(2 / fan_in)) and zero biases. Each tensor
/// draws from its own named stream of `rng`.
IdvModel init_params(const ModelConfig& config, const Rng& rng);

/// Throws InvalidArgument unless `image` is [C,S,S] with a size the model
/// accepts.
void check_image(const ModelConfig& config, const Tensor& image);

/// Raw descriptor f (no dropout, no normalization) for one [C,H,W] image.
Var embed(Graph& g, const IdvModel& model, const Tensor& image);

/// Post-ReLU activation of backbone stage `stage` (before its pool).
Var backbone_activation(Graph& g, const IdvModel& model, const Tensor& image, std::size_t stage);

struct PairOutput {
  Var p1;  // identity posterior of image 1, [K]
  Var p2;  // identity posterior of image 2, [K]
  Var q;   // (same, different) posterior, [2]
  Var f1;  // raw descriptor of image 1, [D]
  Var f2;  // raw descriptor of image 2, [D]
};

/// Both branches share every parameter. In training mode f1 and f2 each get
/// an independent dropout mask (streams "dropout.1" / "dropout.2" of `rng`)
/// and the dropped vectors feed the identity head and the Square Layer.
PairOutput forward_pair(Graph& g, const IdvModel& model, const Tensor& x1, const Tensor& x2,
                        bool training, const Rng& rng);

// Eval-mode conveniences that return plain tensors.
Tensor embed(const IdvModel& model, const Tensor& image);

struct PairPrediction {
  Tensor p1, p2, q, f1, f2;
};
PairPrediction predict_pair(const IdvModel& model, const Tensor& x1, const Tensor& x2);

/// Channel sum of the post-ReLU activation at `stage`, shape [H', W'].
Tensor activation_sum(const IdvModel& model, const Tensor& image, std::size_t stage);

}  // namespace idv
