#pragma once

#include <string>
#include <vector>

#include "idv/model.hpp"
#include "idv/pipeline.hpp"
#include "idv/train_config.hpp"

namespace idv {

/// Everything a run needs, parsed from `key = value` lines.
struct RunConfig {
  std::string manifest;
  std::string out_dir = "run";
  // num_identities == 0 means "take K from the manifest".
  ModelConfig model = [] {
    ModelConfig m;
    m.num_identities = 0;
    return m;
  }();
  AugmentConfig augment; // mean_image is computed, never configured
  TrainConfig train;

  void validate() const;
};

struct ConfigKey {
  const char* name;
  const char* description;
};

/// Every accepted key with a one-line description, in canonical order.
const std::vector<ConfigKey>& config_keys();

/// One `key = value` per line; `#` starts a comment; unknown keys, repeated
/// keys and malformed values are errors. Missing keys keep their defaults.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::string& path);

/// Canonical text with every key. Doubles are printed with 17 significant
/// digits so parse(format(c)) == c.
std::string format_run_config(const RunConfig& config);

/// The subset stored in checkpoints: omits placement-only keys (out_dir,
/// workers) so the same run written to different directories or with a
/// different worker count produces identical bytes.
std::string snapshot_run_config(const RunConfig& config);

std::string format_backbone(const std::vector<StageSpec>& stages);
std::vector<StageSpec> parse_backbone(const std::string& text);

}  // namespace idv
