#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace idv {

/// Counter-based SplitMix64 generator with named sub-streams.
///
/// Every value is produced from integer arithmetic only (normals use
/// Box-Muller on top of that), so a given seed yields the same sequence on
/// every platform. Sub-streams are derived from the stream key, not the
/// current position, so `stream("x")` returns the same generator no matter
/// how many values were drawn from the parent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  Rng stream(std::string_view label) const;
  Rng stream(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer on [0, n). Unbiased (rejection sampling).
  std::size_t uniform_index(std::size_t n);
  double normal();
  bool bernoulli(double p);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  /// Rebuilds a generator at an exact position; used by checkpoint restore.
  static Rng from_state(std::uint64_t key, std::uint64_t counter);

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace idv
