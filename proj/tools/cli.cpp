#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <optional>

#include "idv/checkpoint.hpp"
#include "idv/config.hpp"
#include "idv/descriptors.hpp"
#include "idv/error.hpp"
#include "idv/evaluate.hpp"
#include "idv/file_util.hpp"
#include "idv/gradient_suite.hpp"
#include "idv/image.hpp"
#include "idv/log.hpp"
#include "idv/manifest.hpp"
#include "idv/toy_dataset.hpp"
#include "idv/trainer.hpp"

namespace idv::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Relative paths in a config file are taken relative to the file.
std::string relative_to(const fs::path& base_file, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (base_file.parent_path() / path).lexically_normal().string();
}

struct Options {
  // make-toy
  ToyDatasetConfig toy;
  std::string toy_out;
  // train
  std::string config_path;
  std::string resume_path;
  std::optional<std::size_t> workers;
  // extract / activation-map
  std::string ckpt_path;
  std::string manifest_path;
  std::string split = "query";
  std::string out_path;
  std::string image_path;
  std::size_t stage = 0;
  // evaluate
  std::string query_path;
  std::string gallery_path;
  std::string protocol = "single-query";
  std::string csv_path;
  EvalOptions eval;
  // grad-check
  GradientSuiteOptions suite;
};

int cmd_make_toy(const Options& o, std::ostream& out) {
  out << "make-toy: ids=" << o.toy.num_ids << " per_cam=" << o.toy.images_per_id_per_cam
      << " cams=" << o.toy.num_cams << " sigma=" << o.toy.noise_sigma << " size=" << o.toy.image_size
      << " distractors=" << o.toy.num_distractors << " seed=" << o.toy.seed << "\n";
  const fs::path manifest = generate_toy_dataset(o.toy, o.toy_out);
  out << "wrote " << manifest.string() << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  RunConfig cfg = load_run_config(o.config_path);
  cfg.manifest = relative_to(o.config_path, cfg.manifest);
  cfg.out_dir = relative_to(o.config_path, cfg.out_dir);
  if (o.workers) cfg.train.workers = *o.workers;
  const Manifest manifest = load_manifest(cfg.manifest);
  if (cfg.model.num_identities == 0) cfg.model.num_identities = manifest.num_identities();
  out << "# resolved config\n" << format_run_config(cfg) << std::flush;

  TrainOptions opts;
  opts.out_dir = cfg.out_dir;
  if (!o.resume_path.empty()) {
    opts.resume = load_checkpoint(o.resume_path);
    out << "resuming from " << o.resume_path << " at epoch " << opts.resume->epoch << "\n";
  }
  opts.on_epoch = [&out](const EpochLog& row) { out << format_epoch_row(row) << "\n" << std::flush; };
  out << kEpochLogHeader << "\n";
  train(manifest, cfg, opts);
  out << "wrote " << (fs::path(cfg.out_dir) / "final.idvc").string() << "\n";
  return kExitOk;
}

struct LoadedModel {
  Checkpoint ckpt;
  IdvModel model;
  AugmentConfig augment;
};

LoadedModel load_model(const std::string& path) {
  LoadedModel m;
  m.ckpt = load_checkpoint(path);
  m.model = model_from_checkpoint(m.ckpt);
  m.augment = m.ckpt.config().augment;
  m.augment.mean_image = m.ckpt.mean_image;
  return m;
}

int cmd_extract(const Options& o, std::ostream& out) {
  const Split split = parse_split(o.split);
  if (split == Split::Train) throw UsageError("extract: --split must be query or gallery");
  const LoadedModel m = load_model(o.ckpt_path);
  const Manifest manifest = load_manifest(o.manifest_path, {.require_train = false});
  const auto samples = manifest.subset(split);
  if (samples.empty()) throw InvalidArgument("extract: manifest has no " + o.split + " samples");
  out << "extract: ckpt=" << o.ckpt_path << " manifest=" << o.manifest_path << " split=" << o.split
      << " samples=" << samples.size() << "\n";
  const DescriptorSet set = l2_normalize(extract_descriptors(m.model, manifest, samples, m.augment));
  export_embeddings(set, o.out_path);
  out << "wrote " << set.size() << "x" << set.dim << " descriptors to " << o.out_path << "\n";
  return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  const Protocol protocol = parse_protocol(o.protocol);
  const Manifest manifest = load_manifest(o.manifest_path, {.require_train = false});
  DescriptorSet query = import_embeddings(o.query_path);
  DescriptorSet gallery = import_embeddings(o.gallery_path);
  attach_samples(query, manifest.subset(Split::Query), o.query_path);
  attach_samples(gallery, manifest.subset(Split::Gallery), o.gallery_path);
  if (!query.normalized) query = l2_normalize(std::move(query));
  if (!gallery.normalized) gallery = l2_normalize(std::move(gallery));
  out << "evaluate: protocol=" << o.protocol << " trials=" << o.eval.trials << " seed=" << o.eval.seed
      << " max_rank=" << o.eval.max_rank << "\n";
  const EvalReport report = evaluate(query, gallery, protocol, o.eval);
  const std::string text = format_report(report);
  out << text;
  if (!o.out_path.empty()) write_file_atomic(o.out_path, text);
  if (!o.csv_path.empty()) write_file_atomic(o.csv_path, format_per_query_csv(report, query));
  return kExitOk;
}

int cmd_grad_check(const Options& o, std::ostream& out) {
  out << "grad-check: seed=" << o.suite.seed << " instances=" << o.suite.instances << " h=" << o.suite.step
      << " tol=" << o.suite.tolerance << "\n";
  const GradientSuiteReport report = run_gradient_suite(o.suite);
  out << report.summary();
  return report.passed ? kExitOk : kExitRuntime;
}

int cmd_activation_map(const Options& o, std::ostream& out) {
  const LoadedModel m = load_model(o.ckpt_path);
  if (o.stage >= m.model.config.backbone.size()) {
    throw UsageError("activation-map: --stage must be below " + std::to_string(m.model.config.backbone.size()));
  }
  const Tensor img = preprocess(read_ppm(o.image_path), m.augment);
  Rng unused(0);
  const Tensor input = m.model.config.pooling == PoolingMode::Mac ? img : augment(img, m.augment, false, unused);
  const Tensor map = activation_sum(m.model, input, o.stage);
  write_pgm(minmax_to_byte_range(map), o.out_path);
  out << "activation-map: stage=" << o.stage << " " << map.dim(0) << "x" << map.dim(1) << " -> " << o.out_path
      << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Siamese identification + verification re-ID toolkit"};
  app.require_subcommand(1);
  Options o;

  auto* toy = app.add_subcommand("make-toy", "Generate the synthetic toy dataset");
  toy->add_option("--out", o.toy_out, "Output directory")->required();
  toy->add_option("--ids", o.toy.num_ids, "Identities per split group");
  toy->add_option("--per-cam", o.toy.images_per_id_per_cam, "Images per identity per camera");
  toy->add_option("--cams", o.toy.num_cams, "Number of cameras");
  toy->add_option("--sigma", o.toy.noise_sigma, "Pixel noise standard deviation");
  toy->add_option("--seed", o.toy.seed, "Generator seed");
  toy->add_option("--size", o.toy.image_size, "Image side in pixels");
  toy->add_option("--distractors", o.toy.num_distractors, "Distractor images in the gallery");

  auto* tr = app.add_subcommand("train", "Train from a config file");
  tr->add_option("--config", o.config_path, "key = value config file")->required()->check(CLI::ExistingFile);
  tr->add_option("--resume", o.resume_path, "Checkpoint to continue from")->check(CLI::ExistingFile);
  tr->add_option("--workers", o.workers, "Override the worker count");

  auto* ex = app.add_subcommand("extract", "Extract normalized descriptors");
  ex->add_option("--ckpt", o.ckpt_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  ex->add_option("--manifest", o.manifest_path, "Manifest")->required()->check(CLI::ExistingFile);
  ex->add_option("--split", o.split, "query or gallery")->required()->check(CLI::IsMember({"query", "gallery"}));
  ex->add_option("--out", o.out_path, "Descriptor file to write")->required();

  auto* ev = app.add_subcommand("evaluate", "Evaluate a retrieval protocol");
  ev->add_option("--query", o.query_path, "Query descriptor file")->required()->check(CLI::ExistingFile);
  ev->add_option("--gallery", o.gallery_path, "Gallery descriptor file")->required()->check(CLI::ExistingFile);
  ev->add_option("--manifest", o.manifest_path, "Manifest")->required()->check(CLI::ExistingFile);
  ev->add_option("--protocol", o.protocol, "Protocol")
      ->check(CLI::IsMember({"single-query", "single-shot", "multi-shot", "camera-matrix", "distractor-sweep"}));
  ev->add_option("--trials", o.eval.trials, "Single-shot trials");
  ev->add_option("--seed", o.eval.seed, "Single-shot sampling seed");
  ev->add_option("--sizes", o.eval.gallery_sizes, "Distractor sweep gallery sizes");
  ev->add_option("--max-rank", o.eval.max_rank, "Longest CMC rank reported");
  ev->add_option("--out", o.out_path, "Write the text report here");
  ev->add_option("--csv", o.csv_path, "Write per-query AP CSV here");

  auto* gc = app.add_subcommand("grad-check", "Run the finite-difference gradient suite");
  gc->add_option("--seed", o.suite.seed, "Suite seed");
  gc->add_option("--instances", o.suite.instances, "Random instances per case");

  auto* am = app.add_subcommand("activation-map", "Write a channel-sum activation map as PGM");
  am->add_option("--ckpt", o.ckpt_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  am->add_option("--image", o.image_path, "PPM image")->required()->check(CLI::ExistingFile);
  am->add_option("--stage", o.stage, "Backbone stage (0-based)")->required();
  am->add_option("--out", o.out_path, "PGM file to write")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (app.exit(e, out, err) == 0) return kExitOk;
    err << app.help();
    return kExitUsage;
  }

  auto sink = log::set_sink([&err](log::Level level, std::string_view msg) {
    err << (level == log::Level::Warning ? "warning: " : "") << msg << "\n";
  });
  int code = kExitRuntime;
  try {
    if (*toy) code = cmd_make_toy(o, out);
    else if (*tr) code = cmd_train(o, out);
    else if (*ex) code = cmd_extract(o, out);
    else if (*ev) code = cmd_evaluate(o, out);
    else if (*gc) code = cmd_grad_check(o, out);
    else if (*am) code = cmd_activation_map(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    code = kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    code = kExitRuntime;
  }
  log::set_sink(std::move(sink));
  return code;
}

}  // namespace idv::cli
