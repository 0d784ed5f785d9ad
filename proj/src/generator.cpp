#include "synthdet/generator.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "subprocess.hpp"

namespace synthdet {

namespace fs = std::filesystem;

void GeneratorSpec::validate() const {
  if (!(truncation_psi >= 0.0 && truncation_psi <= 1.0))
    throw ValidationError("truncation_psi must be in [0,1]");
  if (batch_size <= 0) throw ValidationError("batch_size must be positive");
  if (resolution <= 0) throw ValidationError("resolution must be positive");
}

double sample_truncation(Rng& rng) {
  for (;;) {
    const double v = rng.normal(0.5, 0.25);
    if (v >= 0.0 && v <= 1.0) return v;
  }
}

SyntheticBatch generate_batch(const GeneratorSpec& spec,
                              const GeneratorBackend& backend) {
  spec.validate();
  SyntheticBatch batch = backend.generate(spec);
  if (static_cast<int>(batch.images.size()) != spec.batch_size)
    throw AdapterError("generator '" + backend.id() + "' returned " +
                       std::to_string(batch.images.size()) + " images, spec asked for " +
                       std::to_string(spec.batch_size));
  for (const Image& img : batch.images) {
    if (img.width() != spec.resolution || img.height() != spec.resolution)
      throw ConfigError("generator '" + backend.id() +
                        "' does not support resolution " +
                        std::to_string(spec.resolution));
    for (std::size_t i = 0; i < img.size(); ++i) {
      const double v = img.data()[i];
      if (!(v >= 0.0 && v <= 1.0))
        throw AdapterError("generator '" + backend.id() +
                           "' produced a pixel outside [0,1]");
    }
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Toy renderer
// ---------------------------------------------------------------------------

namespace {

// Skin tone band per ethnicity index; the band is the label.
constexpr double kToneBands[kEthnicityCount][3] = {
    {0.94, 0.78, 0.67},  // white
    {0.90, 0.75, 0.57},  // asian
    {0.78, 0.58, 0.42},  // indian
    {0.45, 0.30, 0.20},  // black
    {0.83, 0.64, 0.49},  // latino_hispanic
    {0.72, 0.55, 0.41},  // middle_eastern
};

// Face aspect bands (width fraction). Disjoint so gender stays decodable.
// Both bands keep the whole face inside the solid interior of the standard
// paste oval (semi-axes 0.30W/0.40H, feather 8% of W), so a swap replaces
// the face wholesale and feathers background into background.
constexpr double kMaleWidthCenter = 0.195, kMaleWidthHalf = 0.0125;
constexpr double kFemaleWidthCenter = 0.160, kFemaleWidthHalf = 0.0125;
constexpr double kHeightCenter = 0.270, kHeightHalf = 0.015;

inline std::uint64_t hash3(std::uint64_t seed, std::uint32_t x,
                           std::uint32_t y, std::uint32_t c) {
  std::uint64_t z = seed + x * 0x9e3779b97f4a7c15ULL +
                    y * 0xc2b2ae3d27d4eb4fULL + c * 0x165667b19e3779f9ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double hash01(std::uint64_t seed, int x, int y, int c) {
  return static_cast<double>(hash3(seed, static_cast<std::uint32_t>(x),
                                   static_cast<std::uint32_t>(y),
                                   static_cast<std::uint32_t>(c)) >>
                             11) *
         0x1.0p-53;
}

struct Rgb {
  double r, g, b;
};

inline Rgb mix(const Rgb& a, const Rgb& b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t,
          a.b + (b.b - a.b) * t};
}

}  // namespace

void FaceParams::validate() const {
  if (skin_tone_index < 0 || skin_tone_index >= kEthnicityCount)
    throw ValidationError("skin_tone_index out of range [0,5]");
  if (wrinkle_count < 0 || wrinkle_count > kMaxAgeBucket)
    throw ValidationError("wrinkle_count out of range [0,11]");
  const double lo = kFemaleWidthCenter - kFemaleWidthHalf;
  const double hi = kMaleWidthCenter + kMaleWidthHalf;
  if (face_width_frac < lo - 1e-9 || face_width_frac > hi + 1e-9)
    throw ValidationError("face_width_frac outside documented bands");
  if (face_height_frac < kHeightCenter - kHeightHalf - 1e-9 ||
      face_height_frac > kHeightCenter + kHeightHalf + 1e-9)
    throw ValidationError("face_height_frac outside documented band");
  for (double j : tone_jitter)
    if (std::abs(j) > 0.05 + 1e-9)
      throw ValidationError("tone_jitter exceeds +-0.05");
  if (std::abs(pupil_offset) > 0.02 + 1e-9)
    throw ValidationError("pupil_offset exceeds +-0.02");
  if (mouth_width_scale < 0.85 - 1e-9 || mouth_width_scale > 1.15 + 1e-9)
    throw ValidationError("mouth_width_scale outside [0.85,1.15]");
  if (accent_phase < 0.0 || accent_phase >= 6.283185307179586477 + 1e-9)
    throw ValidationError("accent_phase outside [0, 2*pi)");
  if (accent_strength < 0.04 - 1e-9 || accent_strength > 0.12 + 1e-9)
    throw ValidationError("accent_strength outside [0.04, 0.12]");
  if (bg_freq_u < 2.0 - 1e-9 || bg_freq_u > 5.0 + 1e-9 ||
      bg_freq_v < 2.0 - 1e-9 || bg_freq_v > 5.0 + 1e-9)
    throw ValidationError("background frequency outside [2,5]");
}

FaceParams sample_face_params(Rng& rng, double psi) {
  // Draw order is fixed; it is part of the reproducibility contract.
  FaceParams p;
  p.skin_tone_index = static_cast<int>(rng.below(kEthnicityCount));
  p.gender = static_cast<Gender>(rng.below(2));
  p.wrinkle_count = 1 + static_cast<int>(rng.below(7));  // age buckets 1..7

  auto jitter = [&](double halfwidth) {
    return (2.0 * rng.uniform() - 1.0) * halfwidth * psi;
  };
  p.face_width_frac = (p.gender == Gender::Male ? kMaleWidthCenter
                                                : kFemaleWidthCenter) +
                      jitter(kMaleWidthHalf);
  p.face_height_frac = kHeightCenter + jitter(kHeightHalf);
  for (double& t : p.tone_jitter) t = jitter(0.05);
  p.pupil_offset = jitter(0.02);
  p.mouth_width_scale = 1.0 + jitter(0.15);

  // Scene variety (lighting, background texture) is independent of psi;
  // truncation shapes the face, not the scene.
  p.accent_phase = rng.uniform(0.0, 6.283185307179586477);
  p.accent_strength = rng.uniform(0.04, 0.12);
  p.bg_freq_u = rng.uniform(2.0, 5.0);
  p.bg_freq_v = rng.uniform(2.0, 5.0);
  p.bg_phase = rng.uniform(0.0, 6.283185307179586477);
  p.noise_seed = rng.next_u64();
  return p;
}

RenderedFace toy_render_face(const FaceParams& params, int resolution,
                             ToyStyle style) {
  params.validate();
  if (resolution <= 0) throw ValidationError("resolution must be positive");

  const int res = resolution;
  const double W = res, H = res;
  const double cx = 0.5 * W, cy = 0.5 * H;
  const double a = params.face_width_frac * W;
  const double b = params.face_height_frac * H;

  const double* band = kToneBands[params.skin_tone_index];
  // Headroom at both ends keeps the cast and noise from clamping.
  const Rgb tone = {std::clamp(band[0] + params.tone_jitter[0], 0.05, 0.90),
                    std::clamp(band[1] + params.tone_jitter[1], 0.05, 0.90),
                    std::clamp(band[2] + params.tone_jitter[2], 0.05, 0.90)};

  const bool shifted = style == ToyStyle::ShiftedBackground;
  const Rgb neutral_bg = shifted ? Rgb{0.70, 0.58, 0.50} : Rgb{0.58, 0.62, 0.66};
  // The backdrop tracks the subject's tone closely; a swapped face breaks
  // that agreement, which is the consistency cue detectors are meant to find.
  const Rgb bg_base = mix(neutral_bg, tone, 0.85);
  // Zero-sum lighting cast, identical on every pixel of one scene.
  const double phi = params.accent_phase;
  const double amp = params.accent_strength;
  const double third = 2.0943951023931953;
  const Rgb cast = {amp * std::cos(phi), amp * std::cos(phi - third),
                    amp * std::cos(phi + third)};
  const double noise_amp = shifted ? 0.04 : 0.02;
  const double two_pi = 6.283185307179586477;

  const double eye_dx = 0.40 * a, eye_dy = 0.28 * b;
  const double eye_rx = 0.16 * a, eye_ry = 0.10 * b;
  const double pupil_rx = 0.06 * a, pupil_ry = 0.05 * b;
  const double mouth_rx = 0.32 * a * params.mouth_width_scale;
  const double mouth_ry = 0.07 * b;
  const double mouth_cy = cy + 0.45 * b;
  const Rgb mouth_color = mix(tone, Rgb{0.62, 0.22, 0.22}, 0.8);
  const Rgb sclera = {0.88, 0.88, 0.85};
  const Rgb pupil = {0.08, 0.07, 0.07};

  Image img(res, res);

#pragma omp parallel for schedule(static)
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const double dx = (px - cx) / a, dy = (py - cy) / b;
      const double rho2 = dx * dx + dy * dy;

      Rgb color;
      if (rho2 <= 1.0) {
        const double shade =
            1.0 - 0.05 * (dy + 1.0) * 0.5 - 0.06 * rho2;
        color = {tone.r * shade, tone.g * shade, tone.b * shade};

        // Forehead wrinkle lines, one per age bucket.
        for (int j = 0; j < params.wrinkle_count; ++j) {
          const double line_y = cy - b * (0.45 + 0.04 * j);
          if (std::abs(py - line_y) <= 0.6 && rho2 <= 0.86 * 0.86) {
            color = {color.r * 0.78, color.g * 0.78, color.b * 0.78};
            break;
          }
        }

        // Nose.
        if (std::abs(px - cx) <= 0.035 * a && py >= cy - 0.02 * b &&
            py <= cy + 0.18 * b)
          color = {tone.r * 0.85 * shade, tone.g * 0.85 * shade,
                   tone.b * 0.85 * shade};

        // Mouth.
        {
          const double mx = (px - cx) / mouth_rx, my = (py - mouth_cy) / mouth_ry;
          if (mx * mx + my * my <= 1.0) color = mouth_color;
        }

        // Eyes and pupils take priority over everything else.
        for (int side = -1; side <= 1; side += 2) {
          const double ecx = cx + side * eye_dx, ecy = cy - eye_dy;
          const double ex = (px - ecx) / eye_rx, ey = (py - ecy) / eye_ry;
          if (ex * ex + ey * ey <= 1.0) {
            color = sclera;
            const double pcx = ecx + params.pupil_offset * a;
            const double qx = (px - pcx) / pupil_rx, qy = (py - ecy) / pupil_ry;
            if (qx * qx + qy * qy <= 1.0) color = pupil;
          }
        }
      } else {
        const double u = px / W, v = py / H;
        double pattern;
        if (!shifted) {
          pattern = 0.02 * std::sin(two_pi * (params.bg_freq_u * u +
                                              params.bg_freq_v * v) +
                                    params.bg_phase) +
                    0.015 * std::sin(two_pi * (params.bg_freq_u +
                                               params.bg_freq_v) *
                                         u * v +
                                     2.0 * params.bg_phase);
        } else {
          pattern = 0.025 * std::sin(two_pi * (params.bg_freq_u + 5.0) * u +
                                     params.bg_phase) *
                        std::cos(two_pi * (params.bg_freq_v + 5.0) * v) +
                    (std::sin(two_pi * 3.0 * (u + v)) > 0.0 ? 0.01 : -0.01);
        }
        color = {bg_base.r + pattern, bg_base.g + pattern, bg_base.b + pattern};
      }

      const double nr = (hash01(params.noise_seed, x, y, 0) - 0.5) * 2.0 * noise_amp;
      const double ng = (hash01(params.noise_seed, x, y, 1) - 0.5) * 2.0 * noise_amp;
      const double nb = (hash01(params.noise_seed, x, y, 2) - 0.5) * 2.0 * noise_amp;
      img.at(0, y, x) = std::clamp(color.r + cast.r + nr, 0.0, 1.0);
      img.at(1, y, x) = std::clamp(color.g + cast.g + ng, 0.0, 1.0);
      img.at(2, y, x) = std::clamp(color.b + cast.b + nb, 0.0, 1.0);
    }
  }

  RenderedFace out;
  out.image = std::move(img);
  out.profile.ethnicity = static_cast<Ethnicity>(params.skin_tone_index);
  out.profile.gender = params.gender;
  out.profile.age_bucket = params.wrinkle_count;
  return out;
}

SyntheticBatch ToyGenerator::generate(const GeneratorSpec& spec) const {
  SyntheticBatch batch;
  batch.spec = spec;
  batch.generator_id = id();
  batch.images.resize(spec.batch_size);
  std::vector<DemographicProfile> profiles(spec.batch_size);

#pragma omp parallel for schedule(static)
  for (int i = 0; i < spec.batch_size; ++i) {
    Rng rng(Rng::derive(spec.batch_seed, static_cast<std::uint64_t>(i)));
    const FaceParams params = sample_face_params(rng, spec.truncation_psi);
    RenderedFace face = toy_render_face(params, spec.resolution, style_);
    batch.images[i] = std::move(face.image);
    profiles[i] = face.profile;
  }
  batch.ground_truth_demographics = std::move(profiles);
  return batch;
}

// ---------------------------------------------------------------------------
// External adapter
// ---------------------------------------------------------------------------

namespace {

using detail::ScratchDir;

std::string image_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d.png", index);
  return buf;
}

}  // namespace

ExternalGenerator::ExternalGenerator(std::string command)
    : command_(std::move(command)) {
  if (command_.empty()) throw ConfigError("empty external generator command");
}

SyntheticBatch ExternalGenerator::generate(const GeneratorSpec& spec) const {
  ScratchDir scratch("synthdet-gen-");
  const std::string resolved = detail::resolve_adapter_command(command_);
  char psi_buf[32];
  std::snprintf(psi_buf, sizeof(psi_buf), "%.17g", spec.truncation_psi);
  const std::string cmd = resolved + " --seed " + std::to_string(spec.batch_seed) +
                          " --psi " + psi_buf + " --count " +
                          std::to_string(spec.batch_size) + " --resolution " +
                          std::to_string(spec.resolution) + " --out-dir " +
                          scratch.path.string();
  const auto result = detail::run_command(cmd, scratch.path);
  if (result.exit_code != 0)
    throw AdapterError("external generator failed (exit " +
                       std::to_string(result.exit_code) + "): " +
                       result.stderr_tail);

  SyntheticBatch batch;
  batch.spec = spec;
  batch.generator_id = id();
  batch.images.reserve(spec.batch_size);
  for (int i = 0; i < spec.batch_size; ++i) {
    const auto file = scratch.path / image_name(i);
    if (!fs::exists(file))
      throw AdapterError("external generator produced no file " +
                         file.filename().string() + "; stderr: " +
                         result.stderr_tail);
    batch.images.push_back(read_png(file.string()));
  }
  return batch;
}

std::unique_ptr<GeneratorBackend> make_generator(const std::string& name) {
  if (name == "toy") return std::make_unique<ToyGenerator>(ToyStyle::Default);
  if (name == "toy-shifted")
    return std::make_unique<ToyGenerator>(ToyStyle::ShiftedBackground);
  if (name.rfind("external:", 0) == 0)
    return std::make_unique<ExternalGenerator>(name.substr(9));
  throw ConfigError("unknown generator '" + name +
                    "' (expected toy, toy-shifted, or external:<command>)");
}

}  // namespace synthdet
