#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "synthdet/generator.hpp"
#include "synthdet/image.hpp"
#include "synthdet/swapper.hpp"

namespace synthdet {

// Label convention: unswapped images (synthetic or dataset) are the real
// class, swapped images the fake class.
enum class Label : int { Real = 0, Fake = 1 };

inline const char* label_name(Label l) {
  return l == Label::Real ? "real" : "fake";
}
Label parse_label(const std::string& s);

inline constexpr const char* kLabelConvention = "real=unswapped;fake=swapped";

struct LabeledExample {
  Image image;
  Label label = Label::Real;
  std::string id;
  std::optional<DemographicProfile> profile;
};

struct DetectorConfig {
  std::string architecture_id = "tiny-cnn";
  int input_resolution = 64;
  std::string optimizer = "sgd";  // "sgd" (momentum optional) or "adam"
  double learning_rate = 1e-2;
  double momentum = 0.0;  // plain SGD by default
  // Fraction of final steps whose parameter iterates are averaged into the
  // returned model (Polyak tail averaging). 0 disables it.
  double polyak_tail = 0.0;
  int batch_size = 12;
  int steps_per_epoch = 2000;
  int epochs = 1;  // 0 is legal: the model stays at its seeded initialization
  std::uint64_t optimizer_seed = 0;

  void validate() const;
};

// A trainable network family. Implementations are pure functions of
// (params, input); the toolkit trains whatever honors this surface.
class Architecture {
 public:
  virtual ~Architecture() = default;
  virtual std::string id() const = 0;
  virtual std::size_t param_count(int input_resolution) const = 0;
  virtual void init_params(double* params, int input_resolution,
                           std::uint64_t seed) const = 0;
  virtual std::array<double, 2> logits(const double* params,
                                       int input_resolution,
                                       const Image& input, Exec exec) const = 0;
  // Forward + full backward in one pass. dlogits_of maps the forward logits
  // to the gradient being pulled back (cross-entropy delta, one-hot probes).
  // Writes param gradients (param_count entries); when dinput is non-null
  // also writes the gradient w.r.t. every input pixel. Returns the forward
  // logits.
  using DlogitsFn =
      std::function<std::array<double, 2>(const std::array<double, 2>&)>;
  virtual std::array<double, 2> backprop(const double* params,
                                         int input_resolution,
                                         const Image& input,
                                         const DlogitsFn& dlogits_of,
                                         double* dparams, Image* dinput,
                                         Exec exec) const = 0;
  virtual bool differentiable() const { return true; }
};

// Built-in ids: "tiny-cnn" (leaky ReLU) and "tiny-cnn-smooth" (tanh); both
// are the same 3-conv-block + global-pool + 2-way-head stack over fixed
// input features. Input resolution must be a positive multiple of 8.
const Architecture& get_architecture(const std::string& id);
std::vector<std::string> architecture_ids();

struct DetectorModel {
  std::string architecture_id;
  DetectorConfig config;
  std::vector<double> params;
  std::string label_convention = kLabelConvention;
  std::string train_type = "UNTRAINED";  // SYNTHETIC_TRAINED | REAL_TRAINED | FINETUNED
  std::string train_swap_backend;
  std::vector<double> loss_history;          // one entry per gradient step
  std::vector<std::uint64_t> batch_seeds;    // generator-backed steps only

  const Architecture& arch() const { return get_architecture(architecture_id); }
};

// Seeded initialization; no training steps.
DetectorModel make_detector(const DetectorConfig& config);

// Softmax probabilities (p_real, p_fake); deterministic, sum to 1.
std::array<double, 2> predict(const DetectorModel& model, const Image& image,
                              Exec exec = Exec::Parallel);

// Pre-softmax score for one class; the quantity saliency and occlusion
// attribute against.
double class_logit(const DetectorModel& model, const Image& image,
                   int class_index, Exec exec = Exec::Parallel);

// d(class logit) / d(pixel), every channel. CapabilityError if the
// architecture is not differentiable.
Image input_gradient(const DetectorModel& model, const Image& image,
                     int class_index, Exec exec = Exec::Parallel);

// argmax with the deterministic tie-break toward Fake.
Label decide(const std::array<double, 2>& probabilities);

struct StepInfo {
  int step = 0;
  int real_count = 0;
  int fake_count = 0;
  double loss = 0.0;
};
using StepObserver = std::function<void(const StepInfo&)>;

// Per-step generator specs for a training run: distinct batch_seed per step
// (base_seed + step) and a truncation value redrawn per batch.
std::function<GeneratorSpec(int)> make_training_stream(
    std::uint64_t base_seed, const DetectorConfig& config);

// Train from scratch on generated batches: each step draws N fresh synthetic
// images (real class), swaps them into N-1 fakes, and takes one SGD step on
// the mean cross-entropy over the combined 2N-1 examples.
DetectorModel train(const GeneratorBackend& generator,
                    const std::function<GeneratorSpec(int)>& spec_stream,
                    const SwapBackend& swap_backend,
                    const DetectorConfig& config,
                    const StepObserver& observer = {});

// Train from scratch on a fixed pool of real images (cyclic batches).
DetectorModel train_on_images(const std::vector<Image>& real_images,
                              const SwapBackend& swap_backend,
                              const DetectorConfig& config,
                              const StepObserver& observer = {});

// Continue training from `model` on n_images real images plus their pair
// swaps. Returns a new model; `model` is left untouched.
DetectorModel finetune(const DetectorModel& model,
                       const std::vector<Image>& real_images,
                       const SwapBackend& swap_backend, int n_images,
                       const DetectorConfig& config,
                       const StepObserver& observer = {});

// Self-describing checkpoint container (JSON; params as hex-encoded IEEE-754
// doubles). Version-tagged; loading rejects unknown formats.
void save_checkpoint(const DetectorModel& model, const std::string& path);
DetectorModel load_checkpoint(const std::string& path);

}  // namespace synthdet
