#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "idv/config.hpp"
#include "idv/model.hpp"
#include "idv/param_store.hpp"
#include "idv/rng.hpp"
#include "idv/tensor.hpp"

namespace idv {

inline constexpr char kCheckpointMagic[4] = {'I', 'D', 'V', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Training state at an epoch boundary.
///
/// On disk (all integers little-endian):
///   "IDVC", u32 version,
///   u32 length + config text,
///   u64 rng key, u64 rng counter,
///   u32 epochs completed, u32 history length, f64 loss per epoch,
///   u32 record count, then per record:
///     u32 name length, name, u32 rank, u32 dims[rank], f32 data.
/// Records are the model parameters in store order, then
/// "preprocess.mean_image", then one "momentum.<param>" per parameter when
/// momentum buffers are present.
struct Checkpoint {
  std::string config_text;
  Rng rng;
  std::uint32_t epoch = 0;
  std::vector<double> loss_history;
  ParamStore params;
  Tensor mean_image;
  ParamStore momentum;  // empty when training without momentum

  RunConfig config() const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes, const std::string& source = "<memory>");

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the network stored in a checkpoint.
IdvModel model_from_checkpoint(const Checkpoint& ckpt);

/// Rounds every value to the nearest float, the precision checkpoints keep.
void round_to_storage_precision(Tensor& t);
void round_to_storage_precision(ParamStore& store);

}  // namespace idv
