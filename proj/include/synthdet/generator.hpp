#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "synthdet/demographics.hpp"
#include "synthdet/image.hpp"
#include "synthdet/rng.hpp"

namespace synthdet {

// Everything a generator needs to reproduce one batch bit for bit.
struct GeneratorSpec {
  std::uint64_t batch_seed = 0;
  double truncation_psi = 0.5;  // in [0,1]; scales deviation from the average face
  int batch_size = 12;
  int resolution = 64;

  void validate() const;
};

struct SyntheticBatch {
  std::vector<Image> images;
  GeneratorSpec spec;
  std::string generator_id;
  // Present only for the toy renderer, which knows its faces exactly.
  std::optional<std::vector<DemographicProfile>> ground_truth_demographics;
};

class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;
  virtual std::string id() const = 0;
  virtual SyntheticBatch generate(const GeneratorSpec& spec) const = 0;
};

// Draw a truncation value in [0,1]: normal(0.5, 0.25), rejection-sampled
// until the draw lands inside the interval.
double sample_truncation(Rng& rng);

// Validates the spec, runs the backend, and enforces the batch contract
// (exact count, pixel range). Deterministic function of (spec, backend id).
SyntheticBatch generate_batch(const GeneratorSpec& spec,
                              const GeneratorBackend& backend);

// ---------------------------------------------------------------------------
// Toy procedural renderer
//
// A desk-scale stand-in for a pretrained face generator. Faces are stylized:
// a skin-tone-filled oval with eyes, nose, mouth, forehead wrinkle lines, and
// a textured background whose tint follows the skin tone. The parameters
// encode an exact ground-truth DemographicProfile:
//   skin_tone_index 0..5  -> ethnicity label (see kEthnicityLabels order)
//   face aspect band      -> gender (wide band = male, narrow band = female)
//   wrinkle_count k       -> age bucket k
// The encoding is an arbitrary synthetic convention so the bias-audit module
// has exact labels to check against; it claims nothing about real faces.
// ---------------------------------------------------------------------------

struct FaceParams {
  int skin_tone_index = 0;  // 0..5
  Gender gender = Gender::Male;
  int wrinkle_count = 0;  // == age bucket, 0..11

  // Geometry, relative to image side. Jitter amplitudes scale with psi.
  double face_width_frac = 0.195;   // male band [0.1825,0.2075], female [0.1475,0.1725]
  double face_height_frac = 0.270;  // [0.255, 0.285]
  double tone_jitter[3] = {0, 0, 0};  // within-band color wobble, |.| <= 0.05
  double pupil_offset = 0.0;          // [-0.02, 0.02] of face width
  double mouth_width_scale = 1.0;     // [0.85, 1.15]

  // Scene lighting, a zero-sum color cast applied to every pixel. It cancels
  // out of local contrasts within one image, so only a composite of two
  // scenes exposes it.
  double accent_phase = 0.0;     // [0, 2*pi)
  double accent_strength = 0.08; // [0.04, 0.12]

  // Background texture.
  double bg_freq_u = 3.0;  // [2,5] cycles
  double bg_freq_v = 3.0;
  double bg_phase = 0.0;
  std::uint64_t noise_seed = 0;

  void validate() const;
};

// Deterministic parameter sampler: uniform ethnicity, 50/50 gender, age
// buckets 1..7, geometry jittered around band centers by psi.
FaceParams sample_face_params(Rng& rng, double psi);

struct RenderedFace {
  Image image;
  DemographicProfile profile;
};

enum class ToyStyle {
  Default,
  // Alternate background texture family; used as the domain-shifted variant
  // in fine-tuning experiments.
  ShiftedBackground,
};

RenderedFace toy_render_face(const FaceParams& params, int resolution,
                             ToyStyle style = ToyStyle::Default);

class ToyGenerator final : public GeneratorBackend {
 public:
  explicit ToyGenerator(ToyStyle style = ToyStyle::Default) : style_(style) {}
  std::string id() const override {
    return style_ == ToyStyle::Default ? "toy" : "toy-shifted";
  }
  SyntheticBatch generate(const GeneratorSpec& spec) const override;

 private:
  ToyStyle style_;
};

// ---------------------------------------------------------------------------
// External generator adapter
//
// Runs a user-supplied command as
//   <command> --seed S --psi P --count N --resolution R --out-dir DIR
// and expects N files DIR/000000.png .. DIR/00000{N-1}.png (8-bit RGB).
// Relative commands are resolved against $SYNTHDET_ADAPTER_PATH first.
// ---------------------------------------------------------------------------
class ExternalGenerator final : public GeneratorBackend {
 public:
  explicit ExternalGenerator(std::string command);
  std::string id() const override { return "external:" + command_; }
  SyntheticBatch generate(const GeneratorSpec& spec) const override;

 private:
  std::string command_;
};

// Factory used by the CLI: "toy", "toy-shifted", or "external:<command>".
std::unique_ptr<GeneratorBackend> make_generator(const std::string& name);

}  // namespace synthdet
