#include "idv/checkpoint.hpp"

#include <cstring>
#include <limits>

#include "idv/error.hpp"
#include "idv/file_util.hpp"

namespace idv {
namespace {

constexpr const char* kMeanRecord = "preprocess.mean_image";
constexpr const char* kMomentumPrefix = "momentum.";

void write_record(ByteWriter& w, const std::string& name, const Tensor& t) {
  w.string(name);
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  for (double v : t.values()) w.f32(static_cast<float>(v));
}

}  // namespace

RunConfig Checkpoint::config() const { return parse_run_config(config_text, "checkpoint config"); }

void round_to_storage_precision(Tensor& t) {
  for (auto& v : t.values()) v = static_cast<double>(static_cast<float>(v));
}

void round_to_storage_precision(ParamStore& store) {
  for (auto& p : store) round_to_storage_precision(p.value);
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.bytes(std::string_view(kCheckpointMagic, 4));
  w.u32(kCheckpointVersion);
  w.string(ckpt.config_text);
  w.u64(ckpt.rng.key());
  w.u64(ckpt.rng.counter());
  w.u32(ckpt.epoch);
  w.u32(static_cast<std::uint32_t>(ckpt.loss_history.size()));
  for (double v : ckpt.loss_history) w.f64(v);
  const std::size_t records =
      ckpt.params.size() + (ckpt.mean_image.empty() ? 0 : 1) + ckpt.momentum.size();
  w.u32(static_cast<std::uint32_t>(records));
  for (const auto& p : ckpt.params) write_record(w, p.name, p.value);
  if (!ckpt.mean_image.empty()) write_record(w, kMeanRecord, ckpt.mean_image);
  for (const auto& p : ckpt.momentum) write_record(w, kMomentumPrefix + p.name, p.value);
  return w.buffer();
}

Checkpoint decode_checkpoint(std::string_view bytes, const std::string& source) {
  ByteReader r(bytes, source);
  if (r.remaining() < 4 || std::memcmp(r.bytes(4).data(), kCheckpointMagic, 4) != 0) {
    throw FormatError(source + ": not a checkpoint (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(source + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config_text = r.string();
  const std::uint64_t key = r.u64();
  const std::uint64_t counter = r.u64();
  ckpt.rng = Rng::from_state(key, counter);
  ckpt.epoch = r.u32();
  const std::uint32_t hist = r.u32();
  if (hist > r.remaining() / 8) throw FormatError(source + ": truncated loss history");
  ckpt.loss_history.reserve(hist);
  for (std::uint32_t i = 0; i < hist; ++i) ckpt.loss_history.push_back(r.f64());
  const std::uint32_t records = r.u32();
  for (std::uint32_t i = 0; i < records; ++i) {
    std::string name = r.string();
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) throw FormatError(source + ": record '" + name + "' has bad rank");
    Shape shape;
    std::uint64_t volume = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = r.u32();
      if (dim == 0) throw FormatError(source + ": record '" + name + "' has a zero dimension");
      shape.push_back(dim);
      volume *= dim;
      if (volume > r.remaining()) throw FormatError(source + ": record '" + name + "' is truncated");
    }
    if (volume * 4 > r.remaining()) throw FormatError(source + ": record '" + name + "' is truncated");
    std::vector<double> values(static_cast<std::size_t>(volume));
    for (auto& v : values) v = static_cast<double>(r.f32());
    Tensor t(std::move(shape), std::move(values));
    if (name == kMeanRecord) {
      ckpt.mean_image = std::move(t);
    } else if (name.rfind(kMomentumPrefix, 0) == 0) {
      ckpt.momentum.add(name.substr(std::strlen(kMomentumPrefix)), std::move(t));
    } else {
      ckpt.params.add(std::move(name), std::move(t));
    }
  }
  if (r.remaining() != 0) {
    throw FormatError(source + ": " + std::to_string(r.remaining()) + " trailing bytes");
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path), path.string());
}

IdvModel model_from_checkpoint(const Checkpoint& ckpt) {
  const RunConfig cfg = ckpt.config();
  if (cfg.model.num_identities == 0) {
    throw FormatError("checkpoint config does not record num_identities");
  }
  // Build the expected layout, then copy stored values over it so a
  // checkpoint from a different architecture is rejected by name/shape.
  IdvModel model = init_params(cfg.model, Rng(0));
  if (model.params.size() != ckpt.params.size()) {
    throw FormatError("checkpoint has " + std::to_string(ckpt.params.size()) +
                      " parameters, model expects " + std::to_string(model.params.size()));
  }
  for (auto& p : model.params) {
    const Parameter& stored = ckpt.params.get(p.name);
    if (stored.value.shape() != p.value.shape()) {
      throw FormatError("checkpoint parameter '" + p.name + "' has shape " +
                        shape_string(stored.value.shape()) + ", expected " +
                        shape_string(p.value.shape()));
    }
    p.value = stored.value;
  }
  return model;
}

}  // namespace idv
