#include "idv/metrics.hpp"

#include "idv/error.hpp"

namespace idv {

std::optional<double> average_precision(std::span<const Relevance> ranked,
                                        std::optional<std::size_t> num_relevant_total) {
  std::size_t rank = 0, hits = 0;
  double sum = 0.0;
  for (Relevance r : ranked) {
    if (r == Relevance::Ignored) continue;
    ++rank;
    if (r == Relevance::Relevant) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank);
    }
  }
  const std::size_t total = num_relevant_total.value_or(hits);
  if (total < hits) throw InvalidArgument("average_precision: more hits than relevant items");
  if (total == 0) return std::nullopt;
  return sum / static_cast<double>(total);
}

std::optional<std::size_t> first_hit_rank(std::span<const Relevance> ranked) {
  std::size_t rank = 0;
  for (Relevance r : ranked) {
    if (r == Relevance::Ignored) continue;
    ++rank;
    if (r == Relevance::Relevant) return rank;
  }
  return std::nullopt;
}

std::vector<double> cmc_curve(std::span<const std::size_t> first_hits, std::size_t max_rank) {
  std::vector<double> cmc(max_rank, 0.0);
  if (first_hits.empty()) return cmc;
  std::vector<std::size_t> counts(max_rank + 1, 0);
  for (std::size_t h : first_hits) {
    if (h == 0) throw InvalidArgument("cmc_curve: ranks are 1-based");
    if (h <= max_rank) ++counts[h];
  }
  std::size_t running = 0;
  for (std::size_t k = 1; k <= max_rank; ++k) {
    running += counts[k];
    cmc[k - 1] = static_cast<double>(running) / static_cast<double>(first_hits.size());
  }
  return cmc;
}

}  // namespace idv
