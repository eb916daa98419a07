#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "idv/manifest.hpp"
#include "idv/model.hpp"
#include "idv/pipeline.hpp"

namespace idv {

inline constexpr char kDescriptorMagic[4] = {'I', 'D', 'V', 'D'};
inline constexpr std::uint32_t kDescriptorVersion = 1;

/// N x D row-major descriptors with the samples they came from.
struct DescriptorSet {
  std::size_t dim = 0;
  std::vector<double> data;
  std::vector<Sample> samples;
  bool normalized = false;

  std::size_t size() const { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * dim, dim}; }
};

/// Centre-cropped, mean-subtracted images through embed(), in sample order.
/// `augment.mean_image` must be set the same way as during training.
DescriptorSet extract_descriptors(const IdvModel& model, const Manifest& manifest,
                                  std::span<const Sample> samples, const AugmentConfig& augment);

/// Same, for images already decoded at any size (used for MAC inputs).
DescriptorSet extract_from_tensors(const IdvModel& model, std::span<const Tensor> images);

DescriptorSet l2_normalize(DescriptorSet set);

struct Ranking {
  std::vector<std::size_t> order;  // gallery indices, best first
  std::vector<double> scores;      // inner products, aligned with order
};

/// Per query: gallery indices sorted by descending inner product, ties by
/// ascending index. Both sets must be normalized and share a dimension.
std::vector<Ranking> rank(const DescriptorSet& query, const DescriptorSet& gallery);

/// Q x G inner products, row-major.
std::vector<double> score_matrix(const DescriptorSet& query, const DescriptorSet& gallery);

/// Sorts `candidates` (gallery indices) by descending score, ties by index.
void sort_by_score(std::vector<std::size_t>& candidates, std::span<const double> scores);

std::string encode_descriptors(const DescriptorSet& set);
/// Samples are not stored in the file; attach them with attach_samples().
DescriptorSet decode_descriptors(std::string_view bytes, const std::string& source = "<memory>");
void export_embeddings(const DescriptorSet& set, const std::filesystem::path& path);
DescriptorSet import_embeddings(const std::filesystem::path& path);

/// Pairs imported rows with the manifest subset they were extracted from.
void attach_samples(DescriptorSet& set, std::vector<Sample> samples, const std::string& what);

}  // namespace idv
