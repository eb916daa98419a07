#include "idv/model.hpp"

#include <cmath>

#include "idv/error.hpp"
#include "idv/ops.hpp"

namespace idv {

void ModelConfig::validate() const {
  if (input_channels == 0) throw InvalidArgument("model: input_channels must be >= 1");
  if (num_identities < 2) throw InvalidArgument("model: num_identities must be >= 2");
  if (embedding_dim < 2) throw InvalidArgument("model: embedding_dim must be >= 2");
  if (backbone.empty()) throw InvalidArgument("model: backbone needs at least one stage");
  if (!(dropout_rate >= 0.0) || dropout_rate >= 1.0) {
    throw InvalidArgument("model: dropout_rate must be in [0, 1)");
  }
  for (std::size_t i = 0; i < backbone.size(); ++i) {
    if (backbone[i].channels == 0) {
      throw InvalidArgument("model: stage " + std::to_string(i) + " has zero channels");
    }
    if (backbone[i].kernel % 2 == 0) {
      throw InvalidArgument("model: stage " + std::to_string(i) + " kernel must be odd");
    }
  }
  if (input_size == 0 || input_size % size_granularity() != 0) {
    throw InvalidArgument("model: input_size " + std::to_string(input_size) +
                          " must be a positive multiple of " + std::to_string(size_granularity()));
  }
}

std::size_t ModelConfig::pool_count() const {
  std::size_t n = 0;
  for (const auto& s : backbone) n += s.pool ? 1 : 0;
  return n;
}

std::size_t ModelConfig::size_granularity() const { return std::size_t{1} << pool_count(); }

std::size_t ModelConfig::output_side(std::size_t input_side) const {
  return input_side >> pool_count();
}

std::string to_string(PoolingMode mode) {
  return mode == PoolingMode::Mac ? "mac" : "flatten";
}

PoolingMode parse_pooling_mode(const std::string& text) {
  if (text == "mac" || text == "MAC") return PoolingMode::Mac;
  if (text == "flatten" || text == "fixed-flatten") return PoolingMode::FixedFlatten;
  throw InvalidArgument("unknown pooling mode '" + text + "' (expected flatten or mac)");
}

namespace param_names {
std::string conv_weight(std::size_t stage) {
  return "backbone.conv" + std::to_string(stage + 1) + ".weight";
}
std::string conv_bias(std::size_t stage) {
  return "backbone.conv" + std::to_string(stage + 1) + ".bias";
}
}  // namespace param_names

namespace {

Tensor he_normal(Shape shape, std::size_t fan_in, Rng rng) {
  Tensor t(std::move(shape), 0.0);
  const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : t.values()) v = std_dev * rng.normal();
  return t;
}

std::size_t embed_input_size(const ModelConfig& c) {
  const std::size_t channels = c.backbone.back().channels;
  if (c.pooling == PoolingMode::Mac) return channels;
  const std::size_t side = c.output_side(c.input_size);
  return channels * side * side;
}

}  // namespace

IdvModel init_params(const ModelConfig& config, const Rng& rng) {
  config.validate();
  IdvModel model{config, {}};
  auto& ps = model.params;
  std::size_t cin = config.input_channels;
  for (std::size_t i = 0; i < config.backbone.size(); ++i) {
    const auto& s = config.backbone[i];
    const std::size_t fan_in = cin * s.kernel * s.kernel;
    const auto wname = param_names::conv_weight(i);
    ps.add(wname, he_normal({s.channels, cin, s.kernel, s.kernel}, fan_in, rng.stream(wname)));
    ps.add(param_names::conv_bias(i), Tensor({s.channels}, 0.0));
    cin = s.channels;
  }
  const std::size_t d = config.embedding_dim;
  const std::size_t e_in = embed_input_size(config);
  ps.add(param_names::kEmbedWeight, he_normal({d, e_in}, e_in, rng.stream(param_names::kEmbedWeight)));
  ps.add(param_names::kEmbedBias, Tensor({d}, 0.0));
  ps.add(param_names::kIdentWeight,
         he_normal({config.num_identities, d}, d, rng.stream(param_names::kIdentWeight)));
  ps.add(param_names::kIdentBias, Tensor({config.num_identities}, 0.0));
  ps.add(param_names::kVerifWeight, he_normal({2, d}, d, rng.stream(param_names::kVerifWeight)));
  ps.add(param_names::kVerifBias, Tensor({2}, 0.0));
  return model;
}

void check_image(const ModelConfig& config, const Tensor& image) {
  if (image.rank() != 3) {
    throw InvalidArgument("image must be [C,H,W], got " + shape_string(image.shape()));
  }
  if (image.dim(0) != config.input_channels) {
    throw InvalidArgument("image has " + std::to_string(image.dim(0)) + " channels, model expects " +
                          std::to_string(config.input_channels));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  if (config.pooling == PoolingMode::FixedFlatten) {
    if (h != config.input_size || w != config.input_size) {
      throw InvalidArgument("image is " + std::to_string(h) + "x" + std::to_string(w) +
                            ", fixed-flatten model expects " + std::to_string(config.input_size) +
                            "x" + std::to_string(config.input_size));
    }
    return;
  }
  const std::size_t gran = config.size_granularity();
  if (h < gran || w < gran || h % gran != 0 || w % gran != 0) {
    throw InvalidArgument("image is " + std::to_string(h) + "x" + std::to_string(w) +
                          ", MAC model needs sides that are positive multiples of " +
                          std::to_string(gran));
  }
}

namespace {

Var run_backbone(Graph& g, const IdvModel& model, const Tensor& image, std::size_t last_stage,
                 bool pool_last) {
  check_image(model.config, image);
  Var x = g.input(image);
  const auto& stages = model.config.backbone;
  for (std::size_t i = 0; i <= last_stage; ++i) {
    const auto& s = stages[i];
    Var w = g.param(model.params.get(param_names::conv_weight(i)));
    Var b = g.param(model.params.get(param_names::conv_bias(i)));
    x = relu(conv2d(x, w, b, 1, s.kernel / 2));
    if (s.pool && (i < last_stage || pool_last)) x = maxpool2(x);
  }
  return x;
}

}  // namespace

Var backbone_activation(Graph& g, const IdvModel& model, const Tensor& image, std::size_t stage) {
  if (stage >= model.config.backbone.size()) {
    throw InvalidArgument("stage " + std::to_string(stage) + " out of range; backbone has " +
                          std::to_string(model.config.backbone.size()) + " stages");
  }
  return run_backbone(g, model, image, stage, false);
}

Var embed(Graph& g, const IdvModel& model, const Tensor& image) {
  Var x = run_backbone(g, model, image, model.config.backbone.size() - 1, true);
  x = model.config.pooling == PoolingMode::Mac ? global_max_pool(x) : flatten(x);
  return linear(x, g.param(model.params.get(param_names::kEmbedWeight)),
                g.param(model.params.get(param_names::kEmbedBias)));
}

PairOutput forward_pair(Graph& g, const IdvModel& model, const Tensor& x1, const Tensor& x2,
                        bool training, const Rng& rng) {
  PairOutput out;
  out.f1 = embed(g, model, x1);
  out.f2 = embed(g, model, x2);
  Rng r1 = rng.stream("dropout.1");
  Rng r2 = rng.stream("dropout.2");
  Var d1 = dropout(out.f1, model.config.dropout_rate, training, r1);
  Var d2 = dropout(out.f2, model.config.dropout_rate, training, r2);

  Var wi = g.param(model.params.get(param_names::kIdentWeight));
  Var bi = g.param(model.params.get(param_names::kIdentBias));
  out.p1 = softmax(linear(d1, wi, bi));
  out.p2 = softmax(linear(d2, wi, bi));

  Var fs = square_diff(d1, d2);
  out.q = softmax(linear(fs, g.param(model.params.get(param_names::kVerifWeight)),
                         g.param(model.params.get(param_names::kVerifBias))));
  return out;
}

Tensor embed(const IdvModel& model, const Tensor& image) {
  Graph g;
  return embed(g, model, image).value();
}

PairPrediction predict_pair(const IdvModel& model, const Tensor& x1, const Tensor& x2) {
  Graph g;
  const auto out = forward_pair(g, model, x1, x2, false, Rng(0));
  return {out.p1.value(), out.p2.value(), out.q.value(), out.f1.value(), out.f2.value()};
}

Tensor activation_sum(const IdvModel& model, const Tensor& image, std::size_t stage) {
  Graph g;
  const Tensor& act = backbone_activation(g, model, image, stage).value();
  const std::size_t c = act.dim(0), h = act.dim(1), w = act.dim(2);
  Tensor out({h, w}, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < h * w; ++i) out[i] += act[ch * h * w + i];
  }
  return out;
}

}  // namespace idv
