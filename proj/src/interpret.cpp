#include "synthdet/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace synthdet {

const char* heatmap_method_name(HeatmapMethod m) {
  return m == HeatmapMethod::Saliency ? "SALIENCY" : "OCCLUSION";
}

namespace {

Heatmap finalize(int w, int h, std::vector<double> raw, HeatmapMethod method,
                 int target_class, nlohmann::json params) {
  Heatmap map;
  map.width = w;
  map.height = h;
  map.method = method;
  map.target_class = target_class;
  map.params = std::move(params);
  map.raw = std::move(raw);

  map.raw_min = map.raw[0];
  map.raw_max = map.raw[0];
  for (double v : map.raw) {
    map.raw_min = std::min(map.raw_min, v);
    map.raw_max = std::max(map.raw_max, v);
  }
  map.values.resize(map.raw.size());
  const double scale = map.raw_max > 0.0 ? map.raw_max : 1.0;
  for (std::size_t i = 0; i < map.raw.size(); ++i)
    map.values[i] = std::max(map.raw[i], 0.0) / scale;
  return map;
}

}  // namespace

Heatmap saliency_from_gradient(const Image& gradient, int target_class) {
  const int w = gradient.width(), h = gradient.height();
  std::vector<double> raw(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double m = 0.0;
      for (int c = 0; c < 3; ++c)
        m = std::max(m, std::abs(gradient.at(c, y, x)));
      raw[static_cast<std::size_t>(y) * w + x] = m;
    }
  return finalize(w, h, std::move(raw), HeatmapMethod::Saliency, target_class,
                  nlohmann::json::object());
}

Heatmap saliency_map(const DetectorModel& model, const Image& image,
                     int target_class, Exec exec) {
  return saliency_from_gradient(input_gradient(model, image, target_class, exec),
                                target_class);
}

Heatmap occlusion_map_scored(const ScoreFn& score, const Image& image,
                             int target_class, OcclusionParams params) {
  const int w = image.width(), h = image.height();
  int window = params.window;
  if (window == 0) window = std::max(1, std::min(w, h) / 8);
  int stride = params.stride;
  if (stride == 0) stride = std::max(1, window / 2);
  if (window < 1 || window > w || window > h)
    throw ValidationError("occlusion window must be in [1, image side]");
  if (stride < 1) throw ValidationError("occlusion stride must be >= 1");

  const int nx = (w - window) / stride + 1;
  const int ny = (h - window) / stride + 1;
  const double base = score(image);

  std::vector<double> drops(static_cast<std::size_t>(nx) * ny, 0.0);
  bool failed = false;
  std::string failure;

#pragma omp parallel for collapse(2) schedule(dynamic)
  for (int py = 0; py < ny; ++py)
    for (int px = 0; px < nx; ++px) {
      try {
        Image occluded = image;
        const int x0 = px * stride, y0 = py * stride;
        for (int c = 0; c < 3; ++c)
          for (int y = y0; y < y0 + window; ++y)
            for (int x = x0; x < x0 + window; ++x)
              occluded.at(c, y, x) = params.fill_value;
        drops[static_cast<std::size_t>(py) * nx + px] = base - score(occluded);
      } catch (const std::exception& e) {
#pragma omp critical
        {
          failed = true;
          failure = e.what();
        }
      }
    }
  if (failed) throw Error("occlusion scoring failed: " + failure);

  // Serial accumulation in position order keeps the map bit-reproducible.
  std::vector<double> sum(static_cast<std::size_t>(w) * h, 0.0);
  std::vector<int> count(static_cast<std::size_t>(w) * h, 0);
  for (int py = 0; py < ny; ++py)
    for (int px = 0; px < nx; ++px) {
      const double d = drops[static_cast<std::size_t>(py) * nx + px];
      const int x0 = px * stride, y0 = py * stride;
      for (int y = y0; y < y0 + window; ++y)
        for (int x = x0; x < x0 + window; ++x) {
          sum[static_cast<std::size_t>(y) * w + x] += d;
          ++count[static_cast<std::size_t>(y) * w + x];
        }
    }
  std::vector<double> raw(sum.size(), 0.0);
  for (std::size_t i = 0; i < sum.size(); ++i)
    if (count[i] > 0) raw[i] = sum[i] / count[i];

  nlohmann::json jparams{{"window", window},
                         {"stride", stride},
                         {"fill_value", params.fill_value},
                         {"positions_per_axis", nx}};
  return finalize(w, h, std::move(raw), HeatmapMethod::Occlusion, target_class,
                  std::move(jparams));
}

Heatmap occlusion_map(const DetectorModel& model, const Image& image,
                      int target_class, OcclusionParams params, Exec exec) {
  if (target_class != 0 && target_class != 1)
    throw ValidationError("target_class must be 0 (real) or 1 (fake)");
  // Per-window scoring stays serial inside the parallel window fan-out.
  (void)exec;
  return occlusion_map_scored(
      [&](const Image& img) {
        return class_logit(model, img, target_class, Exec::Serial);
      },
      image, target_class, params);
}

std::pair<int, int> heatmap_argmax(const Heatmap& map) {
  int bx = 0, by = 0;
  double best = map.raw_at(0, 0);
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x)
      if (map.raw_at(y, x) > best) {
        best = map.raw_at(y, x);
        bx = x;
        by = y;
      }
  return {bx, by};
}

nlohmann::json heatmap_json(const Heatmap& map) {
  return nlohmann::json{{"method", heatmap_method_name(map.method)},
                        {"target_class", map.target_class},
                        {"width", map.width},
                        {"height", map.height},
                        {"raw_min", map.raw_min},
                        {"raw_max", map.raw_max},
                        {"params", map.params},
                        {"raw", map.raw}};
}

void render_heatmap(const Heatmap& map, const Image& underlay,
                    const std::string& png_path) {
  if (underlay.width() != map.width || underlay.height() != map.height)
    throw ValidationError("heatmap and underlay resolutions differ");

  const Image gray = to_grayscale(underlay);
  Image out(map.width, map.height);
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x) {
      const double v = map.at(y, x);
      const double color[3] = {v, 0.1 + 0.2 * v, 1.0 - v};
      const double alpha = 0.7 * v;  // zero map leaves the underlay intact
      for (int c = 0; c < 3; ++c) {
        const double g = gray.at(c, y, x);
        out.at(c, y, x) = g + alpha * (color[c] - g);
      }
    }
  out.clamp01();
  write_png(out, png_path);

  std::ofstream sidecar(png_path + ".json", std::ios::binary);
  if (!sidecar) throw IoError("cannot write heatmap sidecar: " + png_path + ".json");
  sidecar << heatmap_json(map).dump(2) << '\n';
  if (!sidecar) throw IoError("failed writing heatmap sidecar: " + png_path + ".json");
}

}  // namespace synthdet
