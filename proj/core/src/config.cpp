#include "idv/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "idv/error.hpp"
#include "idv/file_util.hpp"

namespace idv {

void TrainConfig::validate() const {
  if (max_epochs < 1) throw InvalidArgument("train: max_epochs must be >= 1");
  if (final_lr_epochs < 0) throw InvalidArgument("train: final_lr_epochs must be >= 0");
  if (max_epochs <= final_lr_epochs) {
    throw InvalidArgument("train: max_epochs must exceed final_lr_epochs");
  }
  if (batch_size_pairs < 1) throw InvalidArgument("train: batch_size_pairs must be >= 1");
  if (base_lr < 0.0 || final_lr < 0.0) throw InvalidArgument("train: learning rates must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) throw InvalidArgument("train: momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw InvalidArgument("train: weight_decay must be >= 0");
  if (weights.verification < 0.0 || weights.identification < 0.0) {
    throw InvalidArgument("train: loss weights must be >= 0");
  }
  if (!(margin > 0.0)) throw InvalidArgument("train: margin must be > 0");
  if (checkpoint_every < 1) throw InvalidArgument("train: checkpoint_every must be >= 1");
  if (workers < 1) throw InvalidArgument("train: workers must be >= 1");
}

void RunConfig::validate() const {
  augment.validate();
  train.validate();
  if (model.input_size != augment.crop_to) {
    throw InvalidArgument("config: model input size must equal crop_to");
  }
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
T parse_number(const std::string& text, const std::string& key) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw InvalidArgument("config key '" + key + "': cannot parse '" + text + "'");
  }
  return v;
}

double parse_real(const std::string& text, const std::string& key) {
  // std::from_chars for double is missing from some standard libraries.
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) {
    throw InvalidArgument("config key '" + key + "': cannot parse '" + text + "' as a number");
  }
  return v;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct Field {
  const char* name;
  const char* description;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
  bool snapshot = true;
};

template <typename T>
Field size_field(const char* name, const char* desc, T RunConfig::*outer, std::size_t T::*inner) {
  return {name, desc,
          [=](const RunConfig& c) { return std::to_string(c.*outer.*inner); },
          [=](RunConfig& c, const std::string& v) {
            c.*outer.*inner = parse_number<std::size_t>(v, name);
          }};
}

template <typename T>
Field int_field(const char* name, const char* desc, T RunConfig::*outer, int T::*inner) {
  return {name, desc, [=](const RunConfig& c) { return std::to_string(c.*outer.*inner); },
          [=](RunConfig& c, const std::string& v) { c.*outer.*inner = parse_number<int>(v, name); }};
}

template <typename T>
Field real_field(const char* name, const char* desc, T RunConfig::*outer, double T::*inner) {
  return {name, desc, [=](const RunConfig& c) { return fmt_double(c.*outer.*inner); },
          [=](RunConfig& c, const std::string& v) { c.*outer.*inner = parse_real(v, name); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> v;
    v.push_back({"manifest", "dataset manifest CSV",
                 [](const RunConfig& c) { return c.manifest; },
                 [](RunConfig& c, const std::string& s) { c.manifest = s; }});
    v.push_back({"out_dir", "directory for checkpoints and the epoch log",
                 [](const RunConfig& c) { return c.out_dir; },
                 [](RunConfig& c, const std::string& s) { c.out_dir = s; }, false});
    v.push_back(size_field("input_channels", "image channels", &RunConfig::model,
                           &ModelConfig::input_channels));
    v.push_back({"backbone", "conv stages as channels:kernel[:pool], comma separated",
                 [](const RunConfig& c) { return format_backbone(c.model.backbone); },
                 [](RunConfig& c, const std::string& s) { c.model.backbone = parse_backbone(s); }});
    v.push_back(size_field("embedding_dim", "descriptor length D", &RunConfig::model,
                           &ModelConfig::embedding_dim));
    v.push_back(size_field("num_identities", "K; 0 takes the train identity count from the manifest",
                           &RunConfig::model, &ModelConfig::num_identities));
    v.push_back(real_field("dropout_rate", "dropout on f before the heads", &RunConfig::model,
                           &ModelConfig::dropout_rate));
    v.push_back({"pooling", "flatten or mac",
                 [](const RunConfig& c) { return to_string(c.model.pooling); },
                 [](RunConfig& c, const std::string& s) { c.model.pooling = parse_pooling_mode(s); }});
    v.push_back(size_field("resize_to", "side every image is resized to", &RunConfig::augment,
                           &AugmentConfig::resize_to));
    v.push_back(size_field("crop_to", "training crop / eval centre crop side", &RunConfig::augment,
                           &AugmentConfig::crop_to));
    v.push_back(real_field("mirror_prob", "horizontal flip probability in training",
                           &RunConfig::augment, &AugmentConfig::mirror_prob));
    v.push_back(real_field("pixel_scale", "factor applied to mean-subtracted pixel values",
                           &RunConfig::augment, &AugmentConfig::pixel_scale));
    v.push_back(int_field("max_epochs", "number of epochs", &RunConfig::train, &TrainConfig::max_epochs));
    v.push_back(size_field("batch_size_pairs", "pairs per SGD step", &RunConfig::train,
                           &TrainConfig::batch_size_pairs));
    v.push_back(real_field("base_lr", "learning rate before the final phase", &RunConfig::train,
                           &TrainConfig::base_lr));
    v.push_back(real_field("final_lr", "learning rate for the final epochs", &RunConfig::train,
                           &TrainConfig::final_lr));
    v.push_back(int_field("final_lr_epochs", "number of epochs that use final_lr", &RunConfig::train,
                          &TrainConfig::final_lr_epochs));
    v.push_back(real_field("momentum", "SGD momentum (0 = plain SGD)", &RunConfig::train,
                           &TrainConfig::momentum));
    v.push_back(real_field("weight_decay", "L2 weight decay", &RunConfig::train,
                           &TrainConfig::weight_decay));
    v.push_back({"w_verif", "weight of the verification loss",
                 [](const RunConfig& c) { return fmt_double(c.train.weights.verification); },
                 [](RunConfig& c, const std::string& s) { c.train.weights.verification = parse_real(s, "w_verif"); }});
    v.push_back({"w_ident", "weight of each identification loss",
                 [](const RunConfig& c) { return fmt_double(c.train.weights.identification); },
                 [](RunConfig& c, const std::string& s) { c.train.weights.identification = parse_real(s, "w_ident"); }});
    v.push_back({"loss", "I+V, I, V or contrastive",
                 [](const RunConfig& c) { return to_string(c.train.loss_mode); },
                 [](RunConfig& c, const std::string& s) { c.train.loss_mode = parse_loss_mode(s); }});
    v.push_back(real_field("margin", "contrastive margin", &RunConfig::train, &TrainConfig::margin));
    v.push_back({"seed", "master random seed",
                 [](const RunConfig& c) { return std::to_string(c.train.seed); },
                 [](RunConfig& c, const std::string& s) { c.train.seed = parse_number<std::uint64_t>(s, "seed"); }});
    v.push_back(int_field("checkpoint_every", "write a checkpoint every N epochs (plus the final one)",
                          &RunConfig::train, &TrainConfig::checkpoint_every));
    Field workers = size_field("workers", "threads for per-pair forward/backward", &RunConfig::train,
                               &TrainConfig::workers);
    workers.snapshot = false;
    v.push_back(workers);
    return v;
  }();
  return f;
}

std::string format_fields(const RunConfig& config, bool snapshot_only) {
  std::ostringstream os;
  for (const auto& f : fields()) {
    if (snapshot_only && !f.snapshot) continue;
    os << f.name << " = " << f.get(config) << '\n';
  }
  return os.str();
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& f : fields()) k.push_back({f.name, f.description});
    return k;
  }();
  return keys;
}

std::string format_backbone(const std::vector<StageSpec>& stages) {
  std::string out;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(stages[i].channels) + ":" + std::to_string(stages[i].kernel);
    if (stages[i].pool) out += ":pool";
  }
  return out;
}

std::vector<StageSpec> parse_backbone(const std::string& text) {
  std::vector<StageSpec> stages;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    std::vector<std::string> parts;
    std::istringstream is(item);
    std::string part;
    while (std::getline(is, part, ':')) parts.push_back(trim(part));
    if (parts.size() < 2 || parts.size() > 3 || (parts.size() == 3 && parts[2] != "pool")) {
      throw InvalidArgument("backbone stage '" + item + "' must be channels:kernel[:pool]");
    }
    stages.push_back({parse_number<std::size_t>(parts[0], "backbone"),
                      parse_number<std::size_t>(parts[1], "backbone"), parts.size() == 3});
  }
  if (stages.empty()) throw InvalidArgument("backbone needs at least one stage");
  return stages;
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  RunConfig config;
  std::map<std::string, const Field*, std::less<>> by_name;
  for (const auto& f : fields()) by_name.emplace(f.name, &f);
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidArgument(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = by_name.find(key);
    if (it == by_name.end()) throw InvalidArgument(where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw InvalidArgument(where + ": key '" + key + "' repeated");
    try {
      it->second->set(config, value);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(where + ": " + e.what());
    }
  }
  // The network always sees crop_to x crop_to inputs during training.
  config.model.input_size = config.augment.crop_to;
  config.validate();
  return config;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_file(path), path);
}

std::string format_run_config(const RunConfig& config) { return format_fields(config, false); }

std::string snapshot_run_config(const RunConfig& config) { return format_fields(config, true); }

}  // namespace idv
