#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "idv/descriptors.hpp"

namespace idv {

enum class Protocol { SingleQuery, SingleShot, MultiShot, CameraMatrix, DistractorSweep };

std::string to_string(Protocol protocol);
Protocol parse_protocol(const std::string& text);

struct EvalOptions {
  std::size_t max_rank = 20;
  /// Single-shot trials and the seed that draws their galleries.
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  /// Single-shot: identities per gallery, capped by what is available.
  std::size_t single_shot_identities = 100;
  /// Distractor sweep: total gallery sizes, each at least the number of
  /// non-distractor gallery entries.
  std::vector<std::size_t> gallery_sizes;
};

struct QueryRecord {
  std::size_t trial = 0;
  std::size_t query_index = 0;
  double ap = 0.0;
  std::size_t first_hit_rank = 0;
};

struct CameraCell {
  int probe_camera = 0;
  int gallery_camera = 0;
  std::size_t queries = 0;  // scored queries; 0 when no probe had a match
  double rank1 = 0.0;
  double map = 0.0;
};

struct SweepPoint {
  std::size_t gallery_size = 0;
  std::size_t distractors = 0;
  double rank1 = 0.0;
  double map = 0.0;
};

struct EvalReport {
  Protocol protocol = Protocol::SingleQuery;
  std::vector<double> cmc;
  double map = 0.0;
  std::vector<QueryRecord> per_query;
  /// Queries without any relevant gallery entry, per trial or cell summed.
  std::size_t excluded_queries = 0;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::size_t gallery_size = 0;
  std::optional<std::vector<CameraCell>> camera_matrix;
  double camera_avg_rank1 = 0.0;
  double camera_avg_map = 0.0;
  std::optional<std::vector<SweepPoint>> gallery_sweep;

  double rank1() const { return cmc.empty() ? 0.0 : cmc.front(); }
};

EvalReport evaluate(const DescriptorSet& query, const DescriptorSet& gallery, Protocol protocol,
                    const EvalOptions& options = {});

std::string format_report(const EvalReport& report);
/// trial,query_index,path,identity,camera,ap,first_hit_rank
std::string format_per_query_csv(const EvalReport& report, const DescriptorSet& query);

}  // namespace idv
