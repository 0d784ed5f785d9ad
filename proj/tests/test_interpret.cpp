#include "synthdet/interpret.hpp"

#include <atomic>
#include <cmath>

#include "doctest.h"
#include "helpers/test_util.hpp"
#include "synthdet/common.hpp"
#include "synthdet/rng.hpp"

using namespace synthdet;
using testutil::ScratchDir;

namespace {

Image random_image(int res, std::uint64_t seed) {
  Rng rng(seed);
  Image img(res, res);
  for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = rng.uniform();
  return img;
}

DetectorModel smooth_model(std::uint64_t perturb_seed) {
  DetectorConfig config;
  config.architecture_id = "tiny-cnn-smooth";
  config.input_resolution = 16;
  DetectorModel model = make_detector(config);
  Rng rng(perturb_seed);
  for (double& p : model.params) p += rng.uniform(-0.05, 0.05);
  return model;
}

}  // namespace

TEST_CASE("saliency_from_gradient takes the channel-max magnitude") {
  Image grad(3, 2);
  grad.at(0, 0, 0) = 0.2;
  grad.at(1, 0, 0) = -0.7;  // dominates through |.|
  grad.at(2, 0, 0) = 0.1;
  grad.at(0, 1, 2) = 1.4;
  const Heatmap map = saliency_from_gradient(grad, 1);
  CHECK(map.width == 3);
  CHECK(map.height == 2);
  CHECK(map.method == HeatmapMethod::Saliency);
  CHECK(map.target_class == 1);
  CHECK(map.raw_at(0, 0) == doctest::Approx(0.7));
  CHECK(map.raw_at(1, 2) == doctest::Approx(1.4));
  CHECK(map.raw_at(0, 1) == 0.0);
  CHECK(map.raw_max == doctest::Approx(1.4));
  CHECK(map.raw_min == 0.0);
  // values normalize by raw_max.
  CHECK(map.at(1, 2) == doctest::Approx(1.0));
  CHECK(map.at(0, 0) == doctest::Approx(0.7 / 1.4));
}

TEST_CASE("an all-zero gradient yields an all-zero map") {
  const Heatmap map = saliency_from_gradient(Image(4, 4), 0);
  for (double v : map.raw) CHECK(v == 0.0);
  for (double v : map.values) CHECK(v == 0.0);
  CHECK(map.raw_max == 0.0);
}

TEST_CASE("saliency of a constant model is zero everywhere") {
  DetectorConfig config;
  config.input_resolution = 16;
  DetectorModel model = make_detector(config);
  for (double& p : model.params) p = 0.0;  // logits identically zero
  const Heatmap map = saliency_map(model, random_image(16, 1), 1);
  for (double v : map.raw) CHECK(v == 0.0);
}

TEST_CASE("saliency matches finite differences of the class logit") {
  const DetectorModel model = smooth_model(44);
  const Image img = random_image(16, 45);
  const Heatmap map = saliency_map(model, img, 1);
  REQUIRE(map.width == 16);

  Rng pick(46);
  const double eps = 1e-5;
  double worst = 0.0;
  for (int k = 0; k < 30; ++k) {
    const int y = static_cast<int>(pick.below(16));
    const int x = static_cast<int>(pick.below(16));
    double fd_max = 0.0;
    for (int c = 0; c < 3; ++c) {
      Image lo = img, hi = img;
      lo.at(c, y, x) -= eps;
      hi.at(c, y, x) += eps;
      const double fd = (class_logit(model, hi, 1, Exec::Serial) -
                         class_logit(model, lo, 1, Exec::Serial)) /
                        (2 * eps);
      fd_max = std::max(fd_max, std::abs(fd));
    }
    worst = std::max(worst, std::abs(map.raw_at(y, x) - fd_max));
  }
  CHECK(worst <= 1e-3);
}

TEST_CASE("saliency maps are deterministic across exec modes") {
  const DetectorModel model = smooth_model(50);
  const Image img = random_image(16, 51);
  const Heatmap a = saliency_map(model, img, 0, Exec::Parallel);
  const Heatmap b = saliency_map(model, img, 0, Exec::Serial);
  CHECK(a.raw == b.raw);
  CHECK(a.values == b.values);
}

TEST_CASE("occlusion of a constant scorer is exactly zero") {
  const Image img = random_image(16, 60);
  const Heatmap map = occlusion_map_scored(
      [](const Image&) { return 3.25; }, img, 1, {4, 2, 0.0});
  for (double v : map.raw) CHECK(v == 0.0);
  CHECK(map.params.at("window") == 4);
  CHECK(map.params.at("stride") == 2);
}

TEST_CASE("occlusion recovers a planted sensitive patch") {
  // Score = mean over a known 8x8 patch; filling it with zeros drops the
  // score, so the occlusion peak must land inside the patch.
  const int res = 32, px0 = 16, py0 = 8, psz = 8;
  Image img(res, res);
  for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = 1.0;
  auto patch_mean = [&](const Image& im) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c)
      for (int y = py0; y < py0 + psz; ++y)
        for (int x = px0; x < px0 + psz; ++x) s += im.at(c, y, x);
    return s / (3.0 * psz * psz);
  };
  OcclusionParams params;
  params.window = 8;
  params.stride = 4;
  params.fill_value = 0.0;
  const Heatmap map = occlusion_map_scored(patch_mean, img, 1, params);

  const auto [ax, ay] = heatmap_argmax(map);
  CHECK(ax >= px0);
  CHECK(ax < px0 + psz);
  CHECK(ay >= py0);
  CHECK(ay < py0 + psz);

  // A pixel far from the patch has zero drop.
  CHECK(map.raw_at(31, 0) == 0.0);
  // The patch center is covered only by fully-overlapping windows.
  CHECK(map.raw_at(py0 + 4, px0 + 4) > 0.0);
}

TEST_CASE("occlusion window accounting and validation") {
  const Image img = random_image(16, 70);

  SUBCASE("scorer call count is positions + 1 baseline") {
    std::atomic<int> calls{0};
    OcclusionParams params;
    params.window = 8;
    params.stride = 4;
    (void)occlusion_map_scored(
        [&](const Image&) {
          ++calls;
          return 0.0;
        },
        img, 0, params);
    // 3 positions per axis at window 8 stride 4 on a 16-px side.
    CHECK(calls.load() == 3 * 3 + 1);
  }
  SUBCASE("defaults derive from the resolution") {
    const Heatmap map = occlusion_map_scored(
        [](const Image& im) { return im.at(0, 0, 0); }, img, 0, {});
    CHECK(map.params.at("window") == 2);  // 16 / 8
    CHECK(map.params.at("stride") == 1);
    CHECK(map.params.at("fill_value") == 0.5);
  }
  SUBCASE("full-image window is a single position") {
    std::atomic<int> calls{0};
    OcclusionParams params;
    params.window = 16;
    (void)occlusion_map_scored(
        [&](const Image&) {
          ++calls;
          return 1.0;
        },
        img, 0, params);
    CHECK(calls.load() == 2);
  }
  SUBCASE("invalid windows are rejected") {
    OcclusionParams params;
    params.window = 20;
    CHECK_THROWS_AS((void)occlusion_map_scored(
                        [](const Image&) { return 0.0; }, img, 0, params),
                    ValidationError);
    params.window = 4;
    params.stride = -1;
    CHECK_THROWS_AS((void)occlusion_map_scored(
                        [](const Image&) { return 0.0; }, img, 0, params),
                    ValidationError);
  }
}

TEST_CASE("negative drops stay in raw but clamp out of values") {
  // Occluding RAISES this score wherever the image is dark.
  const int res = 8;
  Image img(res, res);  // all zeros; filling with 1s raises the mean
  auto mean_all = [](const Image& im) {
    double s = 0.0;
    for (std::size_t i = 0; i < im.size(); ++i) s += im.data()[i];
    return s / static_cast<double>(im.size());
  };
  OcclusionParams params;
  params.window = 4;
  params.stride = 4;
  params.fill_value = 1.0;
  const Heatmap map = occlusion_map_scored(mean_all, img, 0, params);
  CHECK(map.raw_min < 0.0);
  CHECK(map.raw_max <= 0.0);
  for (double v : map.values) CHECK(v == 0.0);  // nothing positive to show
}

TEST_CASE("occlusion through a model is reproducible") {
  const DetectorModel model = smooth_model(80);
  const Image img = random_image(16, 81);
  OcclusionParams params;
  params.window = 4;
  params.stride = 2;
  const Heatmap a = occlusion_map(model, img, 1, params);
  const Heatmap b = occlusion_map(model, img, 1, params);
  CHECK(a.raw == b.raw);
  CHECK_THROWS_AS((void)occlusion_map(model, img, 2, params), ValidationError);

  // The raw drop equals base minus occluded logit for an isolated window.
  OcclusionParams solo;
  solo.window = 16;
  const Heatmap whole = occlusion_map(model, img, 1, solo);
  Image filled(16, 16);
  for (std::size_t i = 0; i < filled.size(); ++i) filled.data()[i] = 0.5;
  const double expect = class_logit(model, img, 1, Exec::Serial) -
                        class_logit(model, filled, 1, Exec::Serial);
  CHECK(whole.raw_at(7, 7) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("heatmap argmax scans row-major and keeps the first maximum") {
  Heatmap map;
  map.width = 3;
  map.height = 2;
  map.raw = {0.1, 0.9, 0.3, 0.9, 0.0, 0.2};
  const auto [x, y] = heatmap_argmax(map);
  CHECK(x == 1);
  CHECK(y == 0);
}

TEST_CASE("heatmap json carries the full raw grid") {
  Image grad(2, 2);
  grad.at(0, 0, 1) = -0.5;
  grad.at(2, 1, 0) = 0.25;
  const Heatmap map = saliency_from_gradient(grad, 1);
  const auto j = heatmap_json(map);
  CHECK(j.at("method") == "SALIENCY");
  CHECK(j.at("target_class") == 1);
  CHECK(j.at("width") == 2);
  CHECK(j.at("height") == 2);
  CHECK(j.at("raw").size() == 4);
  CHECK(j.at("raw")[1] == doctest::Approx(0.5));
  CHECK(j.at("raw_max") == doctest::Approx(0.5));
}

TEST_CASE("render_heatmap writes a deterministic overlay plus sidecar") {
  ScratchDir scratch;
  const Image underlay = random_image(8, 90);

  // All-zero map: the rendered PNG is exactly the grayscale underlay.
  const Heatmap zero = saliency_from_gradient(Image(8, 8), 0);
  const std::string zpath = scratch.file("zero.png");
  render_heatmap(zero, underlay, zpath);
  const Image rendered = read_png(zpath);
  const Image gray = to_grayscale(underlay);
  Image quantized = gray;
  quantized.clamp01();
  CHECK(max_abs_diff(rendered, quantized) < 1.0 / 255.0 + 1e-9);

  // Non-trivial map: rendering twice gives identical bytes, and the sidecar
  // holds the raw scores.
  Image grad(8, 8);
  grad.at(0, 3, 4) = 1.0;
  const Heatmap map = saliency_from_gradient(grad, 1);
  const std::string path = scratch.file("map.png");
  render_heatmap(map, underlay, path);
  const std::string bytes = testutil::read_file(path);
  const std::string path2 = scratch.file("map2.png");
  render_heatmap(map, underlay, path2);
  CHECK(bytes == testutil::read_file(path2));

  const auto sidecar = nlohmann::json::parse(testutil::read_file(path + ".json"));
  CHECK(sidecar.at("method") == "SALIENCY");
  CHECK(sidecar.at("raw")[3 * 8 + 4] == doctest::Approx(1.0));

  const Image small(4, 4);
  CHECK_THROWS_AS(render_heatmap(map, small, scratch.file("bad.png")),
                  ValidationError);
}
