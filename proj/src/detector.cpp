#include "synthdet/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "synthdet/kernels.hpp"
#include "synthdet/swapper.hpp"

namespace synthdet {

using json = nlohmann::json;

Label parse_label(const std::string& s) {
  if (s == "real") return Label::Real;
  if (s == "fake") return Label::Fake;
  throw ValidationError("unknown label '" + s + "' (expected real or fake)");
}

void DetectorConfig::validate() const {
  if (input_resolution <= 0)
    throw ValidationError("input_resolution must be positive");
  if (optimizer != "sgd" && optimizer != "adam")
    throw ValidationError("optimizer must be \"sgd\" or \"adam\"");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ValidationError("learning_rate must be positive and finite");
  if (momentum < 0.0 || momentum >= 1.0)
    throw ValidationError("momentum must be in [0,1)");
  if (polyak_tail < 0.0 || polyak_tail >= 1.0)
    throw ValidationError("polyak_tail must be in [0,1)");
  if (batch_size < 2)
    throw ValidationError(
        "batch_size must be at least 2 (each step needs N real plus N-1 "
        "swapped examples)");
  if (steps_per_epoch <= 0)
    throw ValidationError("steps_per_epoch must be positive");
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
}

// ---------------------------------------------------------------------------
// tiny-cnn: fixed input features | conv3x3 act pool | conv act pool | conv
// act pool | global average pool | dense(2)
//
// Input featurization (fixed, not learned): opponent color (luma + two
// chroma differences), x/y coordinates, a bump over the standard compositing
// oval boundary, and forensic residuals (gradients of the box-smoothed
// chroma planes). Compositing seams are chroma ramps at a known radius, so
// these features make the seam linearly exposable while staying cheap.
// ---------------------------------------------------------------------------

namespace {

namespace k = kernels;

constexpr double kGradGain = 8.0;

void box_smooth3(const double* src, int res, double* dst) {
  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x) {
      double s = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < res && xx >= 0 && xx < res)
            s += src[static_cast<std::size_t>(yy) * res + xx];
        }
      dst[static_cast<std::size_t>(y) * res + x] = s / 9.0;
    }
}

void central_grads(const double* s, int res, double* gx, double* gy) {
  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * res + x;
      if (y == 0 || y == res - 1 || x == 0 || x == res - 1) {
        gx[i] = 0.0;
        gy[i] = 0.0;
        continue;
      }
      gx[i] = kGradGain * 0.5 * (s[i + 1] - s[i - 1]);
      gy[i] = kGradGain * 0.5 * (s[i + res] - s[i - res]);
    }
}

// Adjoint of box_smooth3 followed by central_grads; adds the result onto
// dchroma. Box smoothing under zero padding is self-adjoint.
void residual_adjoint(const double* dgx, const double* dgy, int res,
                      double* dchroma) {
  const std::size_t n = static_cast<std::size_t>(res) * res;
  std::vector<double> ds(n, 0.0), sm(n);
  for (int y = 1; y < res - 1; ++y)
    for (int x = 1; x < res - 1; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * res + x;
      const double ax = kGradGain * 0.5 * dgx[i];
      const double ay = kGradGain * 0.5 * dgy[i];
      ds[i + 1] += ax;
      ds[i - 1] -= ax;
      ds[i + res] += ay;
      ds[i - res] -= ay;
    }
  box_smooth3(ds.data(), res, sm.data());
  for (std::size_t i = 0; i < n; ++i) dchroma[i] += sm[i];
}

class TinyCnn final : public Architecture {
 public:
  TinyCnn(k::Act act, std::string id) : act_(act), id_(std::move(id)) {}

  static constexpr int kInC = 10, kC1 = 12, kC2 = 24, kC3 = 48;

  std::string id() const override { return id_; }

  std::size_t param_count(int res) const override {
    validate_resolution(res);
    return kNumParams;
  }

  void init_params(double* params, int res, std::uint64_t seed) const override {
    validate_resolution(res);
    std::size_t off = 0;
    init_layer(params, off, kInC * kC1 * 9, kC1, kInC * 9, seed, 0);
    init_layer(params, off, kC1 * kC2 * 9, kC2, kC1 * 9, seed, 1);
    init_layer(params, off, kC2 * kC3 * 9, kC3, kC2 * 9, seed, 2);
    init_layer(params, off, 2 * kC3, 2, kC3, seed, 3);
  }

  std::array<double, 2> logits(const double* params, int res,
                               const Image& input, Exec exec) const override {
    Buffers buf(res);
    return forward(params, res, input, exec, buf);
  }

  std::array<double, 2> backprop(const double* params, int res,
                                 const Image& input,
                                 const DlogitsFn& dlogits_of, double* dparams,
                                 Image* dinput, Exec exec) const override {
    Buffers buf(res);
    const auto out = forward(params, res, input, exec, buf);
    backward(params, res, input, buf, dlogits_of(out), dparams, dinput, exec);
    return out;
  }

 private:
  struct Offsets {
    std::size_t w1 = 0, b1, w2, b2, w3, b3, wd, bd;
    Offsets() {
      b1 = w1 + kInC * kC1 * 9;
      w2 = b1 + kC1;
      b2 = w2 + kC1 * kC2 * 9;
      w3 = b2 + kC2;
      b3 = w3 + kC2 * kC3 * 9;
      wd = b3 + kC3;
      bd = wd + 2 * kC3;
    }
  };
  static inline const Offsets kOff{};
  static constexpr std::size_t kNumParams =
      kInC * kC1 * 9 + kC1 + kC1 * kC2 * 9 + kC2 + kC2 * kC3 * 9 + kC3 +
      2 * kC3 + 2;

  struct Buffers {
    int r1, r2, r3, r4;
    std::vector<double> x0;  // fixed input features, kInC planes
    std::vector<double> sm;  // smoothing scratch, 1 plane
    std::vector<double> z1, a1, p1, z2, a2, p2, z3, a3, p3;
    std::array<double, kC3> feat;
    explicit Buffers(int res)
        : r1(res), r2(res / 2), r3(res / 4), r4(res / 8) {
      x0.resize(static_cast<std::size_t>(kInC) * r1 * r1);
      sm.resize(static_cast<std::size_t>(r1) * r1);
      // Position features depend only on the resolution: x and y in [-1, 1]
      // plus a triangular bump peaking on the standard compositing oval
      // boundary and reaching zero half a radius away.
      const k::OvalMask oval = face_oval(res, res);
      const std::size_t n = static_cast<std::size_t>(res) * res;
      double* xs = x0.data() + 3 * n;
      double* ys = xs + n;
      double* bump = ys + n;
      for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * res + x;
          xs[i] = (2.0 * x + 1.0) / res - 1.0;
          ys[i] = (2.0 * y + 1.0) / res - 1.0;
          const double dx = (x - oval.cx) / oval.a;
          const double dy = (y - oval.cy) / oval.b;
          const double rho = std::sqrt(dx * dx + dy * dy);
          bump[i] = std::max(0.0, 1.0 - std::abs(rho - 1.0) * 2.0);
        }
      z1.resize(static_cast<std::size_t>(kC1) * r1 * r1);
      a1.resize(z1.size());
      p1.resize(static_cast<std::size_t>(kC1) * r2 * r2);
      z2.resize(static_cast<std::size_t>(kC2) * r2 * r2);
      a2.resize(z2.size());
      p2.resize(static_cast<std::size_t>(kC2) * r3 * r3);
      z3.resize(static_cast<std::size_t>(kC3) * r3 * r3);
      a3.resize(z3.size());
      p3.resize(static_cast<std::size_t>(kC3) * r4 * r4);
    }
  };

  static void validate_resolution(int res) {
    if (res <= 0 || res % 8 != 0)
      throw ConfigError("tiny-cnn input_resolution must be a positive "
                        "multiple of 8, got " + std::to_string(res));
  }

  // He-uniform weights, zero biases, one derived stream per layer.
  static void init_layer(double* params, std::size_t& off, std::size_t n_w,
                         std::size_t n_b, int fan_in, std::uint64_t seed,
                         int layer) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(layer)));
    const double limit = std::sqrt(6.0 / fan_in);
    for (std::size_t i = 0; i < n_w; ++i)
      params[off + i] = rng.uniform(-limit, limit);
    off += n_w;
    for (std::size_t i = 0; i < n_b; ++i) params[off + i] = 0.0;
    off += n_b;
  }

  std::array<double, 2> forward(const double* p, int res, const Image& in,
                                Exec exec, Buffers& buf) const {
    if (in.width() != res || in.height() != res)
      throw ValidationError("input resolution mismatch: model expects " +
                            std::to_string(res));
    // Fixed opponent color transform: centered luminance plus two chroma
    // difference channels. Invertible, so no information is lost.
    const double* raw = in.data();
    const std::size_t plane = static_cast<std::size_t>(res) * res;
    for (std::size_t i = 0; i < plane; ++i) {
      const double r = raw[i], g = raw[plane + i], bch = raw[2 * plane + i];
      buf.x0[i] = (r + g + bch) * (2.0 / 3.0) - 1.0;
      buf.x0[plane + i] = 2.0 * (r - g);
      buf.x0[2 * plane + i] = r + g - 2.0 * bch;
    }
    for (int c = 0; c < 2; ++c) {
      box_smooth3(buf.x0.data() + (1 + c) * plane, res, buf.sm.data());
      central_grads(buf.sm.data(), res, buf.x0.data() + (6 + 2 * c) * plane,
                    buf.x0.data() + (7 + 2 * c) * plane);
    }
    k::conv2d_forward(buf.x0.data(), kInC, buf.r1, buf.r1, p + kOff.w1,
                      p + kOff.b1, kC1, buf.z1.data(), exec);
    k::activation_forward(buf.z1.data(), buf.z1.size(), act_, buf.a1.data(),
                          exec);
    k::avgpool2_forward(buf.a1.data(), kC1, buf.r1, buf.r1, buf.p1.data(),
                        exec);
    k::conv2d_forward(buf.p1.data(), kC1, buf.r2, buf.r2, p + kOff.w2,
                      p + kOff.b2, kC2, buf.z2.data(), exec);
    k::activation_forward(buf.z2.data(), buf.z2.size(), act_, buf.a2.data(),
                          exec);
    k::avgpool2_forward(buf.a2.data(), kC2, buf.r2, buf.r2, buf.p2.data(),
                        exec);
    k::conv2d_forward(buf.p2.data(), kC2, buf.r3, buf.r3, p + kOff.w3,
                      p + kOff.b3, kC3, buf.z3.data(), exec);
    k::activation_forward(buf.z3.data(), buf.z3.size(), act_, buf.a3.data(),
                          exec);
    k::avgpool2_forward(buf.a3.data(), kC3, buf.r3, buf.r3, buf.p3.data(),
                        exec);

    const double inv_area = 1.0 / (static_cast<double>(buf.r4) * buf.r4);
    for (int c = 0; c < kC3; ++c) {
      double s = 0.0;
      const double* plane = buf.p3.data() + static_cast<std::size_t>(c) * buf.r4 * buf.r4;
      for (int i = 0; i < buf.r4 * buf.r4; ++i) s += plane[i];
      buf.feat[c] = s * inv_area;
    }
    std::array<double, 2> out;
    for (int j = 0; j < 2; ++j) {
      double s = p[kOff.bd + j];
      for (int c = 0; c < kC3; ++c) s += p[kOff.wd + j * kC3 + c] * buf.feat[c];
      out[j] = s;
    }
    return out;
  }

  void backward(const double* p, int res, const Image& in, const Buffers& buf,
                const std::array<double, 2>& dlogits, double* dp,
                Image* dinput, Exec exec) const {
    (void)res;
    (void)in;
    std::array<double, kC3> dfeat{};
    for (int j = 0; j < 2; ++j) {
      dp[kOff.bd + j] = dlogits[j];
      for (int c = 0; c < kC3; ++c) {
        dp[kOff.wd + j * kC3 + c] = dlogits[j] * buf.feat[c];
        dfeat[c] += dlogits[j] * p[kOff.wd + j * kC3 + c];
      }
    }

    const double inv_area = 1.0 / (static_cast<double>(buf.r4) * buf.r4);
    std::vector<double> dp3(buf.p3.size());
    for (int c = 0; c < kC3; ++c) {
      const double g = dfeat[c] * inv_area;
      double* plane = dp3.data() + static_cast<std::size_t>(c) * buf.r4 * buf.r4;
      for (int i = 0; i < buf.r4 * buf.r4; ++i) plane[i] = g;
    }

    std::vector<double> da3(buf.a3.size()), dz3(buf.z3.size());
    k::avgpool2_backward(dp3.data(), kC3, buf.r3, buf.r3, da3.data(), exec);
    k::activation_backward(da3.data(), buf.a3.data(), da3.size(), act_,
                           dz3.data(), exec);
    k::conv2d_backward_weights(buf.p2.data(), kC2, buf.r3, buf.r3, dz3.data(),
                               kC3, dp + kOff.w3, dp + kOff.b3, exec);

    std::vector<double> dp2(buf.p2.size());
    k::conv2d_backward_input(dz3.data(), kC3, buf.r3, buf.r3, p + kOff.w3, kC2,
                             dp2.data(), exec);

    std::vector<double> da2(buf.a2.size()), dz2(buf.z2.size());
    k::avgpool2_backward(dp2.data(), kC2, buf.r2, buf.r2, da2.data(), exec);
    k::activation_backward(da2.data(), buf.a2.data(), da2.size(), act_,
                           dz2.data(), exec);
    k::conv2d_backward_weights(buf.p1.data(), kC1, buf.r2, buf.r2, dz2.data(),
                               kC2, dp + kOff.w2, dp + kOff.b2, exec);

    std::vector<double> dp1(buf.p1.size());
    k::conv2d_backward_input(dz2.data(), kC2, buf.r2, buf.r2, p + kOff.w2, kC1,
                             dp1.data(), exec);

    std::vector<double> da1(buf.a1.size()), dz1(buf.z1.size());
    k::avgpool2_backward(dp1.data(), kC1, buf.r1, buf.r1, da1.data(), exec);
    k::activation_backward(da1.data(), buf.a1.data(), da1.size(), act_,
                           dz1.data(), exec);
    k::conv2d_backward_weights(buf.x0.data(), kInC, buf.r1, buf.r1, dz1.data(),
                               kC1, dp + kOff.w1, dp + kOff.b1, exec);

    if (dinput) {
      if (dinput->width() != buf.r1 || dinput->height() != buf.r1)
        *dinput = Image(buf.r1, buf.r1);
      std::vector<double> dx0(buf.x0.size());
      k::conv2d_backward_input(dz1.data(), kC1, buf.r1, buf.r1, p + kOff.w1,
                               kInC, dx0.data(), exec);
      const std::size_t plane = static_cast<std::size_t>(buf.r1) * buf.r1;
      // The residual planes feed back into the chroma planes through the
      // transposed residual pipeline; position planes are constants.
      for (int c = 0; c < 2; ++c)
        residual_adjoint(dx0.data() + (6 + 2 * c) * plane,
                         dx0.data() + (7 + 2 * c) * plane, buf.r1,
                         dx0.data() + (1 + c) * plane);
      // Transpose of the opponent transform Jacobian.
      double* g = dinput->data();
      for (std::size_t i = 0; i < plane; ++i) {
        const double d0 = dx0[i], d1 = dx0[plane + i], d2 = dx0[2 * plane + i];
        g[i] = (2.0 / 3.0) * d0 + 2.0 * d1 + d2;
        g[plane + i] = (2.0 / 3.0) * d0 - 2.0 * d1 + d2;
        g[2 * plane + i] = (2.0 / 3.0) * d0 - 2.0 * d2;
      }
    }
  }

  k::Act act_;
  std::string id_;
};

}  // namespace

const Architecture& get_architecture(const std::string& id) {
  static const TinyCnn relu{k::Act::LeakyRelu, "tiny-cnn"};
  static const TinyCnn smooth{k::Act::Tanh, "tiny-cnn-smooth"};
  if (id == "tiny-cnn") return relu;
  if (id == "tiny-cnn-smooth") return smooth;
  throw ConfigError("unknown architecture '" + id + "'");
}

std::vector<std::string> architecture_ids() {
  return {"tiny-cnn", "tiny-cnn-smooth"};
}

DetectorModel make_detector(const DetectorConfig& config) {
  config.validate();
  const Architecture& arch = get_architecture(config.architecture_id);
  DetectorModel model;
  model.architecture_id = config.architecture_id;
  model.config = config;
  model.params.resize(arch.param_count(config.input_resolution));
  arch.init_params(model.params.data(), config.input_resolution,
                   config.optimizer_seed);
  return model;
}

namespace {

std::array<double, 2> softmax2(const std::array<double, 2>& l) {
  const double m = std::max(l[0], l[1]);
  const double e0 = std::exp(l[0] - m), e1 = std::exp(l[1] - m);
  const double s = e0 + e1;
  return {e0 / s, e1 / s};
}

void check_input(const DetectorModel& model, const Image& image) {
  if (image.width() != model.config.input_resolution ||
      image.height() != model.config.input_resolution)
    throw ValidationError(
        "image resolution " + std::to_string(image.width()) + "x" +
        std::to_string(image.height()) + " does not match model input " +
        std::to_string(model.config.input_resolution));
}

}  // namespace

std::array<double, 2> predict(const DetectorModel& model, const Image& image,
                              Exec exec) {
  check_input(model, image);
  return softmax2(model.arch().logits(model.params.data(),
                                      model.config.input_resolution, image,
                                      exec));
}

double class_logit(const DetectorModel& model, const Image& image,
                   int class_index, Exec exec) {
  if (class_index != 0 && class_index != 1)
    throw ValidationError("class_index must be 0 (real) or 1 (fake)");
  check_input(model, image);
  return model.arch().logits(model.params.data(),
                             model.config.input_resolution, image,
                             exec)[class_index];
}

Image input_gradient(const DetectorModel& model, const Image& image,
                     int class_index, Exec exec) {
  if (class_index != 0 && class_index != 1)
    throw ValidationError("class_index must be 0 (real) or 1 (fake)");
  check_input(model, image);
  const Architecture& arch = model.arch();
  if (!arch.differentiable())
    throw CapabilityError("architecture '" + model.architecture_id +
                          "' does not provide input gradients");
  std::array<double, 2> onehot{0.0, 0.0};
  onehot[class_index] = 1.0;
  std::vector<double> dparams(model.params.size());
  Image dinput(image.width(), image.height());
  arch.backprop(model.params.data(), model.config.input_resolution, image,
                [&](const std::array<double, 2>&) { return onehot; },
                dparams.data(), &dinput, exec);
  return dinput;
}

Label decide(const std::array<double, 2>& probabilities) {
  // Tie goes to Fake so the decision stays deterministic.
  return probabilities[1] >= probabilities[0] ? Label::Fake : Label::Real;
}

std::function<GeneratorSpec(int)> make_training_stream(
    std::uint64_t base_seed, const DetectorConfig& config) {
  const std::uint64_t psi_root = Rng::derive(base_seed, 0xA5A5);
  const int batch_size = config.batch_size;
  const int resolution = config.input_resolution;
  return [=](int step) {
    GeneratorSpec spec;
    spec.batch_seed = base_seed + static_cast<std::uint64_t>(step);
    Rng psi_rng(Rng::derive(psi_root, static_cast<std::uint64_t>(step)));
    spec.truncation_psi = sample_truncation(psi_rng);
    spec.batch_size = batch_size;
    spec.resolution = resolution;
    return spec;
  };
}

namespace {

// One SGD step per call to batch_fn; batch_fn yields the step's real images
// plus the generator batch seed when one exists.
using BatchFn =
    std::function<std::pair<std::vector<Image>, std::optional<std::uint64_t>>(
        int step)>;

void train_core(DetectorModel& model, const BatchFn& batch_fn,
                const SwapBackend& swap_backend, const DetectorConfig& config,
                const StepObserver& observer) {
  const Architecture& arch = model.arch();
  const std::size_t n_params = model.params.size();
  const long long total_steps =
      static_cast<long long>(config.epochs) * config.steps_per_epoch;

  const bool adam = config.optimizer == "adam";
  std::vector<double> velocity, adam_m, adam_v;
  if (adam) {
    adam_m.assign(n_params, 0.0);
    adam_v.assign(n_params, 0.0);
  } else if (config.momentum > 0.0) {
    velocity.assign(n_params, 0.0);
  }

  // Iterates from the last ceil(polyak_tail * total) steps are averaged into
  // the returned parameters; the running iterate still drives every step.
  const long long tail_steps =
      config.polyak_tail > 0.0
          ? static_cast<long long>(
                std::ceil(config.polyak_tail * static_cast<double>(total_steps)))
          : 0;
  std::vector<double> tail_sum;
  long long tail_count = 0;
  if (tail_steps > 0) tail_sum.assign(n_params, 0.0);

  std::unordered_set<std::uint64_t> seen_seeds(model.batch_seeds.begin(),
                                               model.batch_seeds.end());

  for (long long step = 0; step < total_steps; ++step) {
    auto [reals, seed] = batch_fn(static_cast<int>(step));
    if (static_cast<int>(reals.size()) != config.batch_size)
      throw ValidationError("batch source yielded " +
                            std::to_string(reals.size()) + " images, expected " +
                            std::to_string(config.batch_size));
    if (seed) {
      if (!seen_seeds.insert(*seed).second)
        throw ValidationError("spec stream reused batch_seed " +
                              std::to_string(*seed) +
                              "; every training batch needs a fresh seed");
    }
    const std::vector<Image> fakes = pair_swap_images(reals, swap_backend);

    const int n_real = static_cast<int>(reals.size());
    const int n_fake = static_cast<int>(fakes.size());
    const int m = n_real + n_fake;
    const double inv_m = 1.0 / m;

    std::vector<std::vector<double>> grads(m);
    std::vector<double> losses(m, 0.0);
    bool failed = false;
    std::string failure;

#pragma omp parallel for schedule(static)
    for (int j = 0; j < m; ++j) {
      try {
        const Image& img = j < n_real ? reals[j] : fakes[j - n_real];
        const int label = j < n_real ? 0 : 1;
        grads[j].assign(n_params, 0.0);
        const auto logits = arch.backprop(
            model.params.data(), config.input_resolution, img,
            [&](const std::array<double, 2>& l) {
              const auto p = softmax2(l);
              return std::array<double, 2>{
                  (p[0] - (label == 0 ? 1.0 : 0.0)) * inv_m,
                  (p[1] - (label == 1 ? 1.0 : 0.0)) * inv_m};
            },
            grads[j].data(), nullptr, Exec::Serial);
        losses[j] = -std::log(softmax2(logits)[label]);
      } catch (const std::exception& e) {
#pragma omp critical
        {
          failed = true;
          failure = e.what();
        }
      }
    }
    if (failed)
      throw Error("training step " + std::to_string(step) + " failed: " +
                  failure);

    // Fixed-order accumulation keeps the run bit-reproducible.
    std::vector<double> grad(n_params, 0.0);
    double loss = 0.0;
    for (int j = 0; j < m; ++j) {
      const double* g = grads[j].data();
      for (std::size_t i = 0; i < n_params; ++i) grad[i] += g[i];
      loss += losses[j];
    }
    loss *= inv_m;

    if (!std::isfinite(loss))
      throw Error("non-finite training loss at step " + std::to_string(step) +
                  " (of " + std::to_string(total_steps) + ")");

    if (adam) {
      // beta1 0.9, beta2 0.999, eps 1e-8, with the usual bias correction.
      const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
      const double t = static_cast<double>(step + 1);
      const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
      for (std::size_t i = 0; i < n_params; ++i) {
        adam_m[i] = b1 * adam_m[i] + (1.0 - b1) * grad[i];
        adam_v[i] = b2 * adam_v[i] + (1.0 - b2) * grad[i] * grad[i];
        model.params[i] -= config.learning_rate * (adam_m[i] / c1) /
                           (std::sqrt(adam_v[i] / c2) + eps);
      }
    } else if (config.momentum > 0.0) {
      for (std::size_t i = 0; i < n_params; ++i) {
        velocity[i] = config.momentum * velocity[i] + grad[i];
        model.params[i] -= config.learning_rate * velocity[i];
      }
    } else {
      for (std::size_t i = 0; i < n_params; ++i)
        model.params[i] -= config.learning_rate * grad[i];
    }

    if (tail_steps > 0 && step >= total_steps - tail_steps) {
      for (std::size_t i = 0; i < n_params; ++i)
        tail_sum[i] += model.params[i];
      ++tail_count;
    }

    model.loss_history.push_back(loss);
    if (seed) model.batch_seeds.push_back(*seed);
    if (observer)
      observer({static_cast<int>(step), n_real, n_fake, loss});
  }

  if (tail_count > 0) {
    const double inv = 1.0 / static_cast<double>(tail_count);
    for (std::size_t i = 0; i < n_params; ++i)
      model.params[i] = tail_sum[i] * inv;
  }
}

}  // namespace

DetectorModel train(const GeneratorBackend& generator,
                    const std::function<GeneratorSpec(int)>& spec_stream,
                    const SwapBackend& swap_backend,
                    const DetectorConfig& config, const StepObserver& observer) {
  config.validate();
  DetectorModel model = make_detector(config);
  model.train_type = "SYNTHETIC_TRAINED";
  model.train_swap_backend = swap_backend.id();

  auto batch_fn = [&](int step) {
    GeneratorSpec spec = spec_stream(step);
    if (spec.batch_size != config.batch_size ||
        spec.resolution != config.input_resolution)
      throw ValidationError(
          "spec stream batch_size/resolution disagrees with detector config");
    SyntheticBatch batch = generate_batch(spec, generator);
    return std::make_pair(std::move(batch.images),
                          std::optional<std::uint64_t>(spec.batch_seed));
  };
  train_core(model, batch_fn, swap_backend, config, observer);
  return model;
}

DetectorModel train_on_images(const std::vector<Image>& real_images,
                              const SwapBackend& swap_backend,
                              const DetectorConfig& config,
                              const StepObserver& observer) {
  config.validate();
  if (static_cast<int>(real_images.size()) < config.batch_size)
    throw ValidationError("training pool has " +
                          std::to_string(real_images.size()) +
                          " images, need at least batch_size = " +
                          std::to_string(config.batch_size));
  DetectorModel model = make_detector(config);
  model.train_type = "REAL_TRAINED";
  model.train_swap_backend = swap_backend.id();

  const int n = static_cast<int>(real_images.size());
  auto batch_fn = [&, n](int step) {
    std::vector<Image> batch;
    batch.reserve(config.batch_size);
    const int start =
        static_cast<int>((static_cast<long long>(step) * config.batch_size) % n);
    for (int i = 0; i < config.batch_size; ++i)
      batch.push_back(real_images[(start + i) % n]);
    return std::make_pair(std::move(batch), std::optional<std::uint64_t>{});
  };
  train_core(model, batch_fn, swap_backend, config, observer);
  return model;
}

DetectorModel finetune(const DetectorModel& model,
                       const std::vector<Image>& real_images,
                       const SwapBackend& swap_backend, int n_images,
                       const DetectorConfig& config,
                       const StepObserver& observer) {
  config.validate();
  if (n_images <= 0) throw ValidationError("n_images must be positive");
  if (static_cast<int>(real_images.size()) < n_images)
    throw ValidationError("dataset has " +
                          std::to_string(real_images.size()) +
                          " images, fine-tuning asked for " +
                          std::to_string(n_images));
  if (config.architecture_id != model.architecture_id ||
      config.input_resolution != model.config.input_resolution)
    throw ValidationError(
        "finetune config must keep the model's architecture and resolution");
  if (n_images < config.batch_size)
    throw ValidationError("n_images is smaller than batch_size");

  DetectorModel tuned = model;  // the input model stays intact
  tuned.train_type = "FINETUNED";
  tuned.train_swap_backend = swap_backend.id();
  tuned.config = config;

  const int n = n_images;
  auto batch_fn = [&, n](int step) {
    std::vector<Image> batch;
    batch.reserve(config.batch_size);
    const int start =
        static_cast<int>((static_cast<long long>(step) * config.batch_size) % n);
    for (int i = 0; i < config.batch_size; ++i)
      batch.push_back(real_images[(start + i) % n]);
    return std::make_pair(std::move(batch), std::optional<std::uint64_t>{});
  };
  train_core(tuned, batch_fn, swap_backend, config, observer);
  return tuned;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kCheckpointFormat = "synthdet-checkpoint";
constexpr int kCheckpointVersion = 1;

std::string encode_params(const std::vector<double>& params) {
  std::string hex;
  hex.reserve(params.size() * 16);
  char buf[17];
  for (double d : params) {
    std::uint64_t u;
    std::memcpy(&u, &d, sizeof(u));
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(u));
    hex.append(buf, 16);
  }
  return hex;
}

std::vector<double> decode_params(const std::string& hex) {
  if (hex.size() % 16 != 0)
    throw IoError("corrupt checkpoint: params_hex length not a multiple of 16");
  std::vector<double> params(hex.size() / 16);
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::uint64_t u = 0;
    for (int j = 0; j < 16; ++j) {
      const char c = hex[i * 16 + j];
      u <<= 4;
      if (c >= '0' && c <= '9') u |= static_cast<std::uint64_t>(c - '0');
      else if (c >= 'a' && c <= 'f') u |= static_cast<std::uint64_t>(c - 'a' + 10);
      else throw IoError("corrupt checkpoint: bad hex digit in params_hex");
    }
    double d;
    std::memcpy(&d, &u, sizeof(d));
    params[i] = d;
  }
  return params;
}

json config_to_json(const DetectorConfig& c) {
  return json{{"architecture_id", c.architecture_id},
              {"input_resolution", c.input_resolution},
              {"optimizer", c.optimizer},
              {"learning_rate", c.learning_rate},
              {"momentum", c.momentum},
              {"polyak_tail", c.polyak_tail},
              {"batch_size", c.batch_size},
              {"steps_per_epoch", c.steps_per_epoch},
              {"epochs", c.epochs},
              {"optimizer_seed", c.optimizer_seed}};
}

DetectorConfig config_from_json(const json& j) {
  DetectorConfig c;
  c.architecture_id = j.at("architecture_id").get<std::string>();
  c.input_resolution = j.at("input_resolution").get<int>();
  c.optimizer = j.at("optimizer").get<std::string>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.momentum = j.at("momentum").get<double>();
  c.polyak_tail = j.at("polyak_tail").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.steps_per_epoch = j.at("steps_per_epoch").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.optimizer_seed = j.at("optimizer_seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void save_checkpoint(const DetectorModel& model, const std::string& path) {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["architecture_id"] = model.architecture_id;
  j["label_convention"] = model.label_convention;
  j["train_type"] = model.train_type;
  j["train_swap_backend"] = model.train_swap_backend;
  j["config"] = config_to_json(model.config);
  j["params_hex"] = encode_params(model.params);
  j["loss_history"] = model.loss_history;
  j["batch_seeds"] = model.batch_seeds;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

DetectorModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("corrupt checkpoint " + path + ": " + e.what());
  }
  if (j.value("format", "") != kCheckpointFormat)
    throw IoError("not a synthdet checkpoint: " + path);
  if (j.value("version", -1) != kCheckpointVersion)
    throw IoError("unsupported checkpoint version in " + path);

  DetectorModel model;
  model.architecture_id = j.at("architecture_id").get<std::string>();
  model.label_convention = j.at("label_convention").get<std::string>();
  model.train_type = j.at("train_type").get<std::string>();
  model.train_swap_backend = j.at("train_swap_backend").get<std::string>();
  model.config = config_from_json(j.at("config"));
  model.params = decode_params(j.at("params_hex").get<std::string>());
  model.loss_history = j.at("loss_history").get<std::vector<double>>();
  model.batch_seeds = j.at("batch_seeds").get<std::vector<std::uint64_t>>();

  const Architecture& arch = get_architecture(model.architecture_id);
  if (model.params.size() != arch.param_count(model.config.input_resolution))
    throw IoError("checkpoint parameter count does not match architecture '" +
                  model.architecture_id + "'");
  return model;
}

}  // namespace synthdet
