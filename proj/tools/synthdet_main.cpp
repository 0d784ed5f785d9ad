// synthdet: command-line surface for the synthetic-face swap-detection
// toolkit. Every command writes its artifacts plus a run manifest with
// content digests into --out, and refuses to share a run directory with a
// concurrent command.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "synthdet/bias.hpp"
#include "synthdet/common.hpp"
#include "synthdet/detector.hpp"
#include "synthdet/evaluation.hpp"
#include "synthdet/generator.hpp"
#include "synthdet/interpret.hpp"
#include "synthdet/manifest.hpp"
#include "synthdet/swapper.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace synthdet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 64;
constexpr int kExitConfig = 65;
constexpr int kExitMissingInput = 66;
constexpr int kExitAdapter = 69;
constexpr int kExitInternal = 70;
constexpr int kExitIo = 74;

constexpr const char* kExitCodeDoc =
    "Exit codes:\n"
    "  0   success\n"
    "  64  usage error (unknown flag or command)\n"
    "  65  invalid configuration or validation failure\n"
    "  66  missing input file or directory\n"
    "  69  external adapter failure\n"
    "  70  internal error\n"
    "  74  I/O failure (including a locked run directory)";

struct MissingInputError : Error {
  using Error::Error;
};

void require_file(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path))
    throw MissingInputError(what + " not found: " + path);
}

void require_dir(const std::string& path, const std::string& what) {
  if (!fs::is_directory(path))
    throw MissingInputError(what + " not found: " + path);
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("failed writing " + path);
}

std::string image_file_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d.png", index);
  return buf;
}

// Config file + flag precedence: a flag the user typed wins; otherwise the
// config file's value; otherwise the built-in default.
class ConfigLayer {
 public:
  ConfigLayer(CLI::App* cmd, std::string* config_path)
      : cmd_(cmd), config_path_(config_path) {}

  void load() {
    if (config_path_->empty()) return;
    require_file(*config_path_, "config file");
    std::ifstream in(*config_path_);
    try {
      in >> data_;
    } catch (const json::exception& e) {
      throw ConfigError("config file " + *config_path_ + " is not valid JSON: " +
                        e.what());
    }
    if (!data_.is_object())
      throw ConfigError("config file must hold a JSON object");
  }

  template <typename T>
  void apply(const std::string& flag, const std::string& key, T& value) const {
    if (cmd_->count(flag) > 0) return;  // explicit flag wins
    if (!data_.contains(key)) return;
    try {
      value = data_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }

 private:
  CLI::App* cmd_;
  std::string* config_path_;
  json data_ = json::object();
};

RunManifest start_manifest(const std::string& command) {
  RunManifest m;
  m.command = command;
  m.started_at = iso8601_utc_now();
  return m;
}

void add_and_track(RunManifest& manifest, const fs::path& run_dir,
                   const fs::path& file) {
  manifest.add_artifact(file.string(),
                        fs::relative(file, run_dir).string());
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string out, config, generator = "toy";
  std::uint64_t seed = 0;
  double psi = 0.5;
  int count = 12;
  int resolution = 64;
};

int run_generate(GenerateArgs& a, const ConfigLayer& cfg) {
  cfg.apply("--seed", "seed", a.seed);
  cfg.apply("--psi", "psi", a.psi);
  cfg.apply("--count", "count", a.count);
  cfg.apply("--resolution", "resolution", a.resolution);
  cfg.apply("--generator", "generator", a.generator);

  RunLock lock(a.out);
  const fs::path run_dir(a.out);
  auto generator = make_generator(a.generator);

  GeneratorSpec spec;
  spec.batch_seed = a.seed;
  spec.truncation_psi = a.psi;
  spec.batch_size = a.count;
  spec.resolution = a.resolution;

  const SyntheticBatch batch = generate_batch(spec, *generator);

  RunManifest manifest = start_manifest("generate");
  manifest.config = {{"seed", a.seed},
                     {"psi", a.psi},
                     {"count", a.count},
                     {"resolution", a.resolution},
                     {"generator", a.generator}};
  manifest.seeds = {{"batch_seed", a.seed}};
  manifest.backends = {{"generator", batch.generator_id}};

  const fs::path img_dir = run_dir / "images";
  fs::create_directories(img_dir);
  for (std::size_t i = 0; i < batch.images.size(); ++i) {
    const fs::path file = img_dir / image_file_name(static_cast<int>(i));
    write_png(batch.images[i], file.string());
    add_and_track(manifest, run_dir, file);
  }

  if (batch.ground_truth_demographics) {
    json people = json::array();
    for (std::size_t i = 0; i < batch.ground_truth_demographics->size(); ++i) {
      const DemographicProfile& p = (*batch.ground_truth_demographics)[i];
      people.push_back({{"index", i},
                        {"ethnicity", kEthnicityLabels[static_cast<int>(p.ethnicity)]},
                        {"gender", kGenderLabels[static_cast<int>(p.gender)]},
                        {"age_bucket", p.age_bucket},
                        {"age_years", p.age_bucket * 10 + 5}});
    }
    const fs::path file = run_dir / "demographics.json";
    write_text(file.string(), json(people).dump(2) + "\n");
    add_and_track(manifest, run_dir, file);
  }

  manifest.write((run_dir / "manifest.json").string());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// swap
// ---------------------------------------------------------------------------

struct SwapArgs {
  std::string out, config, in_dir, backend = "blend";
  int resolution = 0;  // 0 keeps native size
};

int run_swap(SwapArgs& a, const ConfigLayer& cfg) {
  cfg.apply("--backend", "backend", a.backend);
  cfg.apply("--resolution", "resolution", a.resolution);
  require_dir(a.in_dir, "input dataset directory");

  RunLock lock(a.out);
  const fs::path run_dir(a.out);

  const DatasetManifest dataset =
      ingest_dataset(a.in_dir, ResizePolicy{a.resolution});
  const std::vector<Image> images = load_dataset_images(dataset);
  auto backend = make_swap_backend(a.backend);
  const std::vector<Image> swapped = pair_swap_images(images, *backend);

  RunManifest manifest = start_manifest("swap");
  manifest.config = {{"in", a.in_dir},
                     {"backend", a.backend},
                     {"resolution", a.resolution}};
  manifest.backends = {{"swap", backend->id()}};

  const fs::path img_dir = run_dir / "images";
  fs::create_directories(img_dir);
  json provenance = json::array();
  for (std::size_t i = 0; i < swapped.size(); ++i) {
    const fs::path file = img_dir / image_file_name(static_cast<int>(i));
    write_png(swapped[i], file.string());
    add_and_track(manifest, run_dir, file);
    provenance.push_back({{"source_index", i},
                          {"target_index", i + 1},
                          {"source_file", dataset.entries[i].filename},
                          {"target_file", dataset.entries[i + 1].filename},
                          {"backend_id", backend->id()}});
  }

  const fs::path prov_file = run_dir / "provenance.json";
  write_text(prov_file.string(), provenance.dump(2) + "\n");
  add_and_track(manifest, run_dir, prov_file);

  const fs::path ds_file = run_dir / "dataset_manifest.json";
  write_text(ds_file.string(), dataset.to_json().dump(2) + "\n");
  add_and_track(manifest, run_dir, ds_file);

  manifest.write((run_dir / "manifest.json").string());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train / finetune
// ---------------------------------------------------------------------------

std::string loss_history_csv(const std::vector<double>& losses) {
  std::string out = "step,loss\n";
  char buf[48];
  for (std::size_t i = 0; i < losses.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, losses[i]);
    out += buf;
  }
  return out;
}

struct TrainArgs {
  std::string out, config, generator = "toy", backend = "blend",
              arch = "tiny-cnn", dataset, optimizer = "sgd";
  std::uint64_t seed = 0, optimizer_seed = 0;
  int resolution = 64, batch_size = 12, steps = 2000, epochs = 1;
  double lr = 1e-2, momentum = 0.0, polyak_tail = 0.0;
};

int run_train(TrainArgs& a, const ConfigLayer& cfg) {
  cfg.apply("--seed", "seed", a.seed);
  cfg.apply("--generator", "generator", a.generator);
  cfg.apply("--backend", "backend", a.backend);
  cfg.apply("--arch", "arch", a.arch);
  cfg.apply("--dataset", "dataset", a.dataset);
  cfg.apply("--resolution", "resolution", a.resolution);
  cfg.apply("--batch-size", "batch_size", a.batch_size);
  cfg.apply("--steps", "steps_per_epoch", a.steps);
  cfg.apply("--epochs", "epochs", a.epochs);
  cfg.apply("--optimizer", "optimizer", a.optimizer);
  cfg.apply("--lr", "learning_rate", a.lr);
  cfg.apply("--momentum", "momentum", a.momentum);
  cfg.apply("--polyak-tail", "polyak_tail", a.polyak_tail);
  cfg.apply("--optimizer-seed", "optimizer_seed", a.optimizer_seed);

  RunLock lock(a.out);
  const fs::path run_dir(a.out);

  DetectorConfig config;
  config.architecture_id = a.arch;
  config.input_resolution = a.resolution;
  config.optimizer = a.optimizer;
  config.learning_rate = a.lr;
  config.momentum = a.momentum;
  config.polyak_tail = a.polyak_tail;
  config.batch_size = a.batch_size;
  config.steps_per_epoch = a.steps;
  config.epochs = a.epochs;
  config.optimizer_seed = a.optimizer_seed;
  config.validate();

  auto backend = make_swap_backend(a.backend);

  DetectorModel model;
  RunManifest manifest = start_manifest("train");
  if (!a.dataset.empty()) {
    require_dir(a.dataset, "training dataset directory");
    const DatasetManifest dataset =
        ingest_dataset(a.dataset, ResizePolicy{a.resolution});
    model = train_on_images(load_dataset_images(dataset), *backend, config);
    manifest.backends = {{"swap", backend->id()}};
    manifest.config["dataset"] = a.dataset;
  } else {
    auto generator = make_generator(a.generator);
    model = train(*generator, make_training_stream(a.seed, config), *backend,
                  config);
    manifest.backends = {{"generator", generator->id()},
                         {"swap", backend->id()}};
  }

  manifest.config.update(json{{"arch", a.arch},
                              {"resolution", a.resolution},
                              {"optimizer", a.optimizer},
                              {"learning_rate", a.lr},
                              {"momentum", a.momentum},
                              {"polyak_tail", a.polyak_tail},
                              {"batch_size", a.batch_size},
                              {"steps_per_epoch", a.steps},
                              {"epochs", a.epochs},
                              {"generator", a.generator},
                              {"backend", a.backend}});
  manifest.seeds = {{"base_seed", a.seed},
                    {"optimizer_seed", a.optimizer_seed},
                    {"recorded_batch_seeds", model.batch_seeds.size()}};

  const fs::path ckpt = run_dir / "checkpoint.json";
  save_checkpoint(model, ckpt.string());
  add_and_track(manifest, run_dir, ckpt);

  const fs::path losses = run_dir / "loss_history.csv";
  write_text(losses.string(), loss_history_csv(model.loss_history));
  add_and_track(manifest, run_dir, losses);

  manifest.write((run_dir / "manifest.json").string());
  return kExitOk;
}

struct FinetuneArgs {
  std::string out, config, checkpoint, dataset, backend = "blend", optimizer;
  int n_images = 0, steps = 100, epochs = 1, batch_size = 0;
  // <=0 / <0 / empty: keep the checkpoint's value
  double lr = 0.0, momentum = -1.0, polyak_tail = -1.0;
};

int run_finetune(FinetuneArgs& a, const ConfigLayer& cfg) {
  cfg.apply("--checkpoint", "checkpoint", a.checkpoint);
  cfg.apply("--dataset", "dataset", a.dataset);
  cfg.apply("--backend", "backend", a.backend);
  cfg.apply("--n-images", "n_images", a.n_images);
  cfg.apply("--steps", "steps_per_epoch", a.steps);
  cfg.apply("--epochs", "epochs", a.epochs);
  cfg.apply("--batch-size", "batch_size", a.batch_size);
  cfg.apply("--optimizer", "optimizer", a.optimizer);
  cfg.apply("--lr", "learning_rate", a.lr);
  cfg.apply("--momentum", "momentum", a.momentum);
  cfg.apply("--polyak-tail", "polyak_tail", a.polyak_tail);

  require_file(a.checkpoint, "checkpoint");
  require_dir(a.dataset, "fine-tuning dataset directory");

  RunLock lock(a.out);
  const fs::path run_dir(a.out);

  const DetectorModel base = load_checkpoint(a.checkpoint);

  DetectorConfig config = base.config;
  config.steps_per_epoch = a.steps;
  config.epochs = a.epochs;
  if (a.batch_size > 0) config.batch_size = a.batch_size;
  if (!a.optimizer.empty()) config.optimizer = a.optimizer;
  if (a.lr > 0.0) config.learning_rate = a.lr;
  if (a.momentum >= 0.0) config.momentum = a.momentum;
  if (a.polyak_tail >= 0.0) config.polyak_tail = a.polyak_tail;
  config.validate();

  const DatasetManifest dataset = ingest_dataset(
      a.dataset, ResizePolicy{config.input_resolution});
  const std::vector<Image> images = load_dataset_images(dataset);
  const int n_images = a.n_images > 0 ? a.n_images
                                      : static_cast<int>(images.size());

  auto backend = make_swap_backend(a.backend);
  const DetectorModel tuned =
      finetune(base, images, *backend, n_images, config);

  RunManifest manifest = start_manifest("finetune");
  manifest.config = {{"checkpoint", a.checkpoint},
                     {"dataset", a.dataset},
                     {"backend", a.backend},
                     {"n_images", n_images},
                     {"steps_per_epoch", config.steps_per_epoch},
                     {"epochs", config.epochs},
                     {"batch_size", config.batch_size},
                     {"optimizer", config.optimizer},
                     {"learning_rate", config.learning_rate},
                     {"momentum", config.momentum},
                     {"polyak_tail", config.polyak_tail}};
  manifest.seeds = {{"optimizer_seed", config.optimizer_seed}};
  manifest.backends = {{"swap", backend->id()}};

  const fs::path ckpt = run_dir / "checkpoint.json";
  save_checkpoint(tuned, ckpt.string());
  add_and_track(manifest, run_dir, ckpt);

  const fs::path losses = run_dir / "loss_history.csv";
  write_text(losses.string(), loss_history_csv(tuned.loss_history));
  add_and_track(manifest, run_dir, losses);

  manifest.write((run_dir / "manifest.json").string());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string out, config;
  std::vector<std::string> models, backends{"blend", "recolor"}, datasets;
  int resolution = 64;
};

int run_evaluate(EvaluateArgs& a, const ConfigLayer& cfg) {
  cfg.apply("--models", "models", a.models);
  cfg.apply("--backends", "backends", a.backends);
  cfg.apply("--datasets", "datasets", a.datasets);
  cfg.apply("--resolution", "resolution", a.resolution);
  if (a.models.empty()) throw ConfigError("evaluate needs at least one --models entry");
  if (a.datasets.empty()) throw ConfigError("evaluate needs at least one --datasets entry");

  RunLock lock(a.out);
  const fs::path run_dir(a.out);

  std::map<std::string, DetectorModel> loaded;
  for (const auto& path : a.models) {
    require_file(path, "model checkpoint");
    std::string key = fs::path(path).stem().string();
    while (loaded.count(key)) key += "+";
    loaded.emplace(key, load_checkpoint(path));
  }
  std::map<std::string, const DetectorModel*> models;
  for (const auto& [key, model] : loaded) models.emplace(key, &model);

  std::vector<std::unique_ptr<SwapBackend>> backend_owners;
  std::vector<const SwapBackend*> backends;
  for (const auto& name : a.backends) {
    backend_owners.push_back(make_swap_backend(name));
    backends.push_back(backend_owners.back().get());
  }

  std::map<std::string, std::vector<Image>> datasets;
  json dataset_manifests = json::array();
  for (const auto& entry : a.datasets) {
    // "id=dir" names the dataset explicitly; a bare directory uses its name.
    std::string id, dir;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) {
      dir = entry;
      id = fs::path(entry).filename().string();
    } else {
      id = entry.substr(0, eq);
      dir = entry.substr(eq + 1);
    }
    require_dir(dir, "dataset directory");
    DatasetManifest dm = ingest_dataset(dir, ResizePolicy{a.resolution}, id);
    datasets[dm.dataset_id] = load_dataset_images(dm);
    dataset_manifests.push_back(dm.to_json());
  }

  EvalMatrix matrix = cross_modal_matrix(models, backends, datasets);
  matrix.manifest = {{"models", a.models},
                     {"backends", a.backends},
                     {"datasets", a.datasets},
                     {"resolution", a.resolution}};

  RunManifest manifest = start_manifest("evaluate");
  manifest.config = matrix.manifest;
  json backend_ids = json::array();
  for (const auto* b : backends) backend_ids.push_back(b->id());
  manifest.backends = {{"swap", backend_ids}};

  const fs::path csv = run_dir / "eval_matrix.csv";
  write_text(csv.string(), eval_matrix_csv(matrix));
  add_and_track(manifest, run_dir, csv);

  const fs::path js = run_dir / "eval_matrix.json";
  write_text(js.string(), eval_matrix_json(matrix).dump(2) + "\n");
  add_and_track(manifest, run_dir, js);

  const fs::path ds = run_dir / "dataset_manifests.json";
  write_text(ds.string(), dataset_manifests.dump(2) + "\n");
  add_and_track(manifest, run_dir, ds);

  manifest.write((run_dir / "manifest.json").string());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// audit-bias
// ---------------------------------------------------------------------------

struct AuditArgs {
  std::string out, config, predictions;
  long long min_samples = kDefaultMinSamples;
};

int run_audit(AuditArgs& a, const ConfigLayer& cfg) {
  cfg.apply("--predictions", "predictions", a.predictions);
  cfg.apply("--min-samples", "min_samples", a.min_samples);
  require_file(a.predictions, "predictions table");

  RunLock lock(a.out);
  const fs::path run_dir(a.out);

  std::ifstream in(a.predictions, std::ios::binary);
  if (!in) throw IoError("cannot read predictions table: " + a.predictions);
  std::string csv((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());

  const auto records = parse_prediction_table(csv);
  const BiasReport report = audit_records(records, a.min_samples);

  RunManifest manifest = start_manifest("audit-bias");
  manifest.config = {{"predictions", a.predictions},
                     {"min_samples", a.min_samples},
                     {"positive_class", report.positive_class}};

  const fs::path js = run_dir / "bias_report.json";
  write_text(js.string(), bias_report_json(report).dump(2) + "\n");
  add_and_track(manifest, run_dir, js);

  const fs::path filtered = run_dir / "bias_filtered.csv";
  write_text(filtered.string(), bias_report_csv(report, true));
  add_and_track(manifest, run_dir, filtered);

  const fs::path unfiltered = run_dir / "bias_unfiltered.csv";
  write_text(unfiltered.string(), bias_report_csv(report, false));
  add_and_track(manifest, run_dir, unfiltered);

  manifest.write((run_dir / "manifest.json").string());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// explain
// ---------------------------------------------------------------------------

struct ExplainArgs {
  std::string out, config, checkpoint, image, method = "both";
  int target_class = 1, window = 0, stride = 0;
  double fill = 0.5;
};

int run_explain(ExplainArgs& a, const ConfigLayer& cfg) {
  cfg.apply("--checkpoint", "checkpoint", a.checkpoint);
  cfg.apply("--image", "image", a.image);
  cfg.apply("--method", "method", a.method);
  cfg.apply("--target-class", "target_class", a.target_class);
  cfg.apply("--window", "window", a.window);
  cfg.apply("--stride", "stride", a.stride);
  cfg.apply("--fill", "fill_value", a.fill);

  require_file(a.checkpoint, "checkpoint");
  require_file(a.image, "input image");
  if (a.method != "both" && a.method != "saliency" && a.method != "occlusion")
    throw ConfigError("--method must be saliency, occlusion, or both");

  RunLock lock(a.out);
  const fs::path run_dir(a.out);

  const DetectorModel model = load_checkpoint(a.checkpoint);
  Image image = read_png(a.image);
  const int res = model.config.input_resolution;
  if (image.width() != res || image.height() != res)
    image = bilinear_resize(image, res, res);

  RunManifest manifest = start_manifest("explain");
  manifest.config = {{"checkpoint", a.checkpoint},
                     {"image", a.image},
                     {"method", a.method},
                     {"target_class", a.target_class},
                     {"window", a.window},
                     {"stride", a.stride},
                     {"fill_value", a.fill}};

  const auto probabilities = predict(model, image);
  write_text((run_dir / "prediction.json").string(),
             json{{"p_real", probabilities[0]},
                  {"p_fake", probabilities[1]},
                  {"decision", label_name(decide(probabilities))}}
                     .dump(2) +
                 "\n");
  add_and_track(manifest, run_dir, run_dir / "prediction.json");

  if (a.method == "both" || a.method == "saliency") {
    const Heatmap map = saliency_map(model, image, a.target_class);
    const fs::path png = run_dir / "saliency.png";
    render_heatmap(map, image, png.string());
    add_and_track(manifest, run_dir, png);
    add_and_track(manifest, run_dir, fs::path(png.string() + ".json"));
  }
  if (a.method == "both" || a.method == "occlusion") {
    OcclusionParams params{a.window, a.stride, a.fill};
    const Heatmap map = occlusion_map(model, image, a.target_class, params);
    const fs::path png = run_dir / "occlusion.png";
    render_heatmap(map, image, png.string());
    add_and_track(manifest, run_dir, png);
    add_and_track(manifest, run_dir, fs::path(png.string() + ".json"));
  }

  manifest.write((run_dir / "manifest.json").string());
  return kExitOk;
}

// ---------------------------------------------------------------------------

void report_error(const char* type, const std::string& message) {
  std::cerr << json{{"error", {{"type", type}, {"message", message}}}}.dump()
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(kProjectName) +
               ": synthetic-face swap-detection toolkit"};
  app.require_subcommand(1);
  app.footer(kExitCodeDoc);
  app.set_version_flag("--version",
                       std::string(kProjectName) + " " + kProjectVersion);

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate",
                                   "Generate a batch of synthetic face images");
  c_gen->add_option("--out", gen.out, "Run directory")->required();
  c_gen->add_option("--config", gen.config, "JSON config file");
  c_gen->add_option("--seed", gen.seed, "Batch seed");
  c_gen->add_option("--psi", gen.psi, "Truncation psi in [0,1]");
  c_gen->add_option("--count", gen.count, "Images per batch");
  c_gen->add_option("--resolution", gen.resolution, "Square image size");
  c_gen->add_option("--generator", gen.generator,
                    "toy | toy-shifted | external:<command>");

  SwapArgs swp;
  auto* c_swap = app.add_subcommand(
      "swap", "Pair-swap a directory of images (i onto i+1)");
  c_swap->add_option("--out", swp.out, "Run directory")->required();
  c_swap->add_option("--config", swp.config, "JSON config file");
  c_swap->add_option("--in", swp.in_dir, "Input image directory")->required();
  c_swap->add_option("--backend", swp.backend,
                     "blend | recolor | external:<command>");
  c_swap->add_option("--resolution", swp.resolution,
                     "Resize inputs to this square size (0 keeps native)");

  TrainArgs trn;
  auto* c_train = app.add_subcommand("train", "Train a detector");
  c_train->add_option("--out", trn.out, "Run directory")->required();
  c_train->add_option("--config", trn.config, "JSON config file");
  c_train->add_option("--seed", trn.seed, "Base seed for the batch stream");
  c_train->add_option("--generator", trn.generator,
                      "toy | toy-shifted | external:<command>");
  c_train->add_option("--backend", trn.backend,
                      "blend | recolor | external:<command>");
  c_train->add_option("--arch", trn.arch, "Architecture id");
  c_train->add_option("--dataset", trn.dataset,
                      "Train on this image directory instead of a generator");
  c_train->add_option("--resolution", trn.resolution, "Input resolution");
  c_train->add_option("--batch-size", trn.batch_size, "Real images per step");
  c_train->add_option("--steps", trn.steps, "Steps per epoch");
  c_train->add_option("--epochs", trn.epochs, "Epochs");
  c_train->add_option("--optimizer", trn.optimizer, "sgd | adam");
  c_train->add_option("--lr", trn.lr, "Learning rate");
  c_train->add_option("--momentum", trn.momentum, "SGD momentum in [0,1)");
  c_train->add_option("--polyak-tail", trn.polyak_tail,
                      "Fraction of final steps averaged into the returned "
                      "parameters (0 = off)");
  c_train->add_option("--optimizer-seed", trn.optimizer_seed,
                      "Parameter init seed");

  FinetuneArgs fin;
  auto* c_fine = app.add_subcommand(
      "finetune", "Continue training a checkpoint on a real-image directory");
  c_fine->add_option("--out", fin.out, "Run directory")->required();
  c_fine->add_option("--config", fin.config, "JSON config file");
  c_fine->add_option("--checkpoint", fin.checkpoint, "Input checkpoint")
      ->required();
  c_fine->add_option("--dataset", fin.dataset, "Image directory")->required();
  c_fine->add_option("--backend", fin.backend, "Swap backend");
  c_fine->add_option("--n-images", fin.n_images,
                     "How many dataset images to use (0 = all)");
  c_fine->add_option("--steps", fin.steps, "Steps per epoch");
  c_fine->add_option("--epochs", fin.epochs, "Epochs");
  c_fine->add_option("--batch-size", fin.batch_size,
                     "Batch size (0 keeps checkpoint value)");
  c_fine->add_option("--optimizer", fin.optimizer,
                     "sgd | adam (empty keeps checkpoint value)");
  c_fine->add_option("--lr", fin.lr,
                     "Learning rate (0 keeps checkpoint value)");
  c_fine->add_option("--momentum", fin.momentum,
                     "Momentum (negative keeps checkpoint value)");
  c_fine->add_option("--polyak-tail", fin.polyak_tail,
                     "Polyak tail fraction (negative keeps checkpoint value)");

  EvaluateArgs evl;
  auto* c_eval = app.add_subcommand(
      "evaluate", "Cross-modal accuracy matrix: models x backends x datasets");
  c_eval->add_option("--out", evl.out, "Run directory")->required();
  c_eval->add_option("--config", evl.config, "JSON config file");
  c_eval->add_option("--models", evl.models, "Checkpoint paths")
      ->delimiter(',');
  c_eval->add_option("--backends", evl.backends, "Swap backend names")
      ->delimiter(',');
  c_eval->add_option("--datasets", evl.datasets,
                     "Dataset directories (or id=dir)")
      ->delimiter(',');
  c_eval->add_option("--resolution", evl.resolution,
                     "Resize datasets to this square size");

  AuditArgs aud;
  auto* c_audit = app.add_subcommand(
      "audit-bias", "Demographic bias audit over a prediction table");
  c_audit->add_option("--out", aud.out, "Run directory")->required();
  c_audit->add_option("--config", aud.config, "JSON config file");
  c_audit->add_option("--predictions", aud.predictions,
                      "CSV: image_id,prediction,truth,ethnicity,gender,age")
      ->required();
  c_audit->add_option("--min-samples", aud.min_samples,
                      "Facets with n <= this are flagged and excluded from "
                      "headline metrics");

  ExplainArgs exp;
  auto* c_explain = app.add_subcommand(
      "explain", "Saliency and occlusion heatmaps for one image");
  c_explain->add_option("--out", exp.out, "Run directory")->required();
  c_explain->add_option("--config", exp.config, "JSON config file");
  c_explain->add_option("--checkpoint", exp.checkpoint, "Model checkpoint")
      ->required();
  c_explain->add_option("--image", exp.image, "Input image (PNG)")->required();
  c_explain->add_option("--method", exp.method, "saliency | occlusion | both");
  c_explain->add_option("--target-class", exp.target_class,
                        "0 (real) or 1 (fake)");
  c_explain->add_option("--window", exp.window,
                        "Occlusion window (0 = resolution/8)");
  c_explain->add_option("--stride", exp.stride,
                        "Occlusion stride (0 = window/2)");
  c_explain->add_option("--fill", exp.fill, "Occlusion fill value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    return kExitUsage;
  }

  try {
    if (c_gen->parsed()) {
      ConfigLayer cfg(c_gen, &gen.config);
      cfg.load();
      return run_generate(gen, cfg);
    }
    if (c_swap->parsed()) {
      ConfigLayer cfg(c_swap, &swp.config);
      cfg.load();
      return run_swap(swp, cfg);
    }
    if (c_train->parsed()) {
      ConfigLayer cfg(c_train, &trn.config);
      cfg.load();
      return run_train(trn, cfg);
    }
    if (c_fine->parsed()) {
      ConfigLayer cfg(c_fine, &fin.config);
      cfg.load();
      return run_finetune(fin, cfg);
    }
    if (c_eval->parsed()) {
      ConfigLayer cfg(c_eval, &evl.config);
      cfg.load();
      return run_evaluate(evl, cfg);
    }
    if (c_audit->parsed()) {
      ConfigLayer cfg(c_audit, &aud.config);
      cfg.load();
      return run_audit(aud, cfg);
    }
    if (c_explain->parsed()) {
      ConfigLayer cfg(c_explain, &exp.config);
      cfg.load();
      return run_explain(exp, cfg);
    }
    report_error("usage", "no command given");
    return kExitUsage;
  } catch (const MissingInputError& e) {
    report_error("missing-input", e.what());
    return kExitMissingInput;
  } catch (const ConfigError& e) {
    report_error("config", e.what());
    return kExitConfig;
  } catch (const ValidationError& e) {
    report_error("validation", e.what());
    return kExitConfig;
  } catch (const CapabilityError& e) {
    report_error("capability", e.what());
    return kExitConfig;
  } catch (const AdapterError& e) {
    report_error("adapter", e.what());
    return kExitAdapter;
  } catch (const IoError& e) {
    report_error("io", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return kExitInternal;
  }
}
