#include "idv/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "idv/error.hpp"
#include "idv/file_util.hpp"

namespace idv {

namespace {

void append_row(DescriptorSet& set, const Tensor& f) {
  if (set.dim == 0) set.dim = f.size();
  if (f.size() != set.dim) throw InvalidArgument("descriptor dimension changed between samples");
  set.data.insert(set.data.end(), f.values().begin(), f.values().end());
}

}  // namespace

DescriptorSet extract_descriptors(const IdvModel& model, const Manifest& manifest,
                                  std::span<const Sample> samples, const AugmentConfig& augment_cfg) {
  DescriptorSet set;
  Rng unused(0);
  for (const auto& s : samples) {
    const Tensor img = normalize_pixels(load_resized(manifest, s, augment_cfg.resize_to), augment_cfg);
    append_row(set, embed(model, augment(img, augment_cfg, false, unused)));
    set.samples.push_back(s);
  }
  return set;
}

DescriptorSet extract_from_tensors(const IdvModel& model, std::span<const Tensor> images) {
  DescriptorSet set;
  for (const auto& img : images) append_row(set, embed(model, img));
  return set;
}

DescriptorSet l2_normalize(DescriptorSet set) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto r = set.row(i);
    double sq = 0.0;
    for (double v : r) sq += v * v;
    const double norm = std::sqrt(sq);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      const std::string who = i < set.samples.size() ? set.samples[i].path : "row " + std::to_string(i);
      throw NumericError("l2_normalize: descriptor of " + who + " has zero or non-finite norm");
    }
    for (double& v : r) v /= norm;
  }
  set.normalized = true;
  return set;
}

std::vector<double> score_matrix(const DescriptorSet& query, const DescriptorSet& gallery) {
  if (!query.normalized || !gallery.normalized) throw InvalidArgument("rank: descriptor sets must be normalized");
  if (query.size() > 0 && gallery.size() > 0 && query.dim != gallery.dim) {
    throw InvalidArgument("rank: query dimension " + std::to_string(query.dim) +
                          " != gallery dimension " + std::to_string(gallery.dim));
  }
  const std::size_t q = query.size(), g = gallery.size();
  std::vector<double> scores(q * g);
  for (std::size_t i = 0; i < q; ++i) {
    const auto a = query.row(i);
    for (std::size_t j = 0; j < g; ++j) {
      const auto b = gallery.row(j);
      double s = 0.0;
      for (std::size_t d = 0; d < query.dim; ++d) s += a[d] * b[d];
      scores[i * g + j] = s;
    }
  }
  return scores;
}

void sort_by_score(std::vector<std::size_t>& candidates, std::span<const double> scores) {
  std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
}

std::vector<Ranking> rank(const DescriptorSet& query, const DescriptorSet& gallery) {
  const auto scores = score_matrix(query, gallery);
  const std::size_t g = gallery.size();
  std::vector<Ranking> out(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) {
    std::span<const double> row(scores.data() + i * g, g);
    auto& r = out[i];
    r.order.resize(g);
    std::iota(r.order.begin(), r.order.end(), std::size_t{0});
    sort_by_score(r.order, row);
    r.scores.reserve(g);
    for (std::size_t j : r.order) r.scores.push_back(row[j]);
  }
  return out;
}

std::string encode_descriptors(const DescriptorSet& set) {
  if (set.size() == 0) throw InvalidArgument("export_embeddings: descriptor set is empty");
  ByteWriter w;
  w.bytes(std::string_view(kDescriptorMagic, 4));
  w.u32(kDescriptorVersion);
  w.u32(static_cast<std::uint32_t>(set.size()));
  w.u32(static_cast<std::uint32_t>(set.dim));
  for (double v : set.data) w.f32(static_cast<float>(v));
  return w.buffer();
}

DescriptorSet decode_descriptors(std::string_view bytes, const std::string& source) {
  ByteReader r(bytes, source);
  if (r.bytes(4) != std::string_view(kDescriptorMagic, 4)) {
    throw FormatError(source + ": not a descriptor file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kDescriptorVersion) {
    throw FormatError(source + ": unsupported descriptor version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  const std::uint32_t dim = r.u32();
  if (count == 0 || dim == 0) throw FormatError(source + ": empty descriptor file");
  if (r.remaining() != static_cast<std::size_t>(count) * dim * 4) {
    throw FormatError(source + ": payload holds " + std::to_string(r.remaining()) + " bytes, header says " +
                      std::to_string(count) + "x" + std::to_string(dim) + " f32");
  }
  DescriptorSet set;
  set.dim = dim;
  set.data.resize(static_cast<std::size_t>(count) * dim);
  for (double& v : set.data) v = r.f32();
  bool unit = true;
  for (std::size_t i = 0; i < set.size() && unit; ++i) {
    double sq = 0.0;
    for (double v : set.row(i)) sq += v * v;
    unit = std::abs(std::sqrt(sq) - 1.0) <= 1e-6;
  }
  set.normalized = unit;
  return set;
}

void export_embeddings(const DescriptorSet& set, const std::filesystem::path& path) {
  write_file_atomic(path, encode_descriptors(set));
}

DescriptorSet import_embeddings(const std::filesystem::path& path) {
  return decode_descriptors(read_file(path), path.string());
}

void attach_samples(DescriptorSet& set, std::vector<Sample> samples, const std::string& what) {
  if (samples.size() != set.size()) {
    throw InvalidArgument(what + ": descriptor file has " + std::to_string(set.size()) +
                          " rows but the manifest subset has " + std::to_string(samples.size()) + " samples");
  }
  set.samples = std::move(samples);
}

}  // namespace idv
