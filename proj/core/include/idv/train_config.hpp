#pragma once

#include <cstddef>
#include <cstdint>

#include "idv/losses.hpp"

namespace idv {

struct TrainConfig {
  int max_epochs = 75;
  std::size_t batch_size_pairs = 48;
  double base_lr = 0.001;
  double final_lr = 0.0001;
  int final_lr_epochs = 5;
  double momentum = 0.0;
  double weight_decay = 0.0;
  LossWeights weights;
  LossMode loss_mode = LossMode::IdentVerif;
  double margin = 1.0;  // contrastive mode only
  std::uint64_t seed = 42;
  int checkpoint_every = 10;
  std::size_t workers = 1;

  void validate() const;
};

}  // namespace idv
