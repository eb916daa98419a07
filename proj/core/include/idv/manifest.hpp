#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

namespace idv {

inline constexpr int kDistractorIdentity = -1;
inline constexpr const char* kManifestHeader = "path,identity,camera,split,distractor";

enum class Split { Train, Query, Gallery };

std::string to_string(Split split);
Split parse_split(const std::string& text);

struct Sample {
  std::string path;      // as written in the manifest
  int identity = 0;      // original label, or kDistractorIdentity
  int camera = 1;        // >= 1
  Split split = Split::Train;
  bool distractor = false;
  int label = -1;        // contiguous 0..K-1 for train samples, -1 otherwise

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Manifest {
  std::vector<Sample> samples;
  /// train label -> original identity, in first-appearance order.
  std::vector<int> train_identities;
  /// Directory that relative sample paths resolve against.
  std::filesystem::path base_dir;
  /// '#' lines preserved (without the leading '#').
  std::vector<std::string> comments;

  std::size_t num_identities() const { return train_identities.size(); }
  std::vector<Sample> subset(Split split) const;
  std::filesystem::path resolve(const Sample& sample) const;
};

struct ManifestOptions {
  bool require_train = true;
};

/// Parses CSV with header `path,identity,camera,split,distractor`. Blank
/// lines and lines starting with '#' are skipped. Train identities are
/// remapped to 0..K-1 in order of first appearance.
Manifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                        const std::string& source, const ManifestOptions& options = {});
Manifest load_manifest(const std::filesystem::path& path, const ManifestOptions& options = {});

std::string format_manifest(const Manifest& manifest);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

}  // namespace idv
