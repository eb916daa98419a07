#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace idv {

enum class Relevance : unsigned char { Irrelevant, Relevant, Ignored };

/// (1/R) * sum of precision at each relevant hit, with Ignored entries
/// removed before ranks are counted. R defaults to the number of relevant
/// entries in the list. Returns nullopt when R is zero.
std::optional<double> average_precision(std::span<const Relevance> ranked,
                                        std::optional<std::size_t> num_relevant_total = std::nullopt);

/// 1-based rank of the first relevant entry after removing Ignored ones.
std::optional<std::size_t> first_hit_rank(std::span<const Relevance> ranked);

/// cmc[k-1] = fraction of queries whose first hit is at rank <= k.
std::vector<double> cmc_curve(std::span<const std::size_t> first_hits, std::size_t max_rank);

}  // namespace idv
