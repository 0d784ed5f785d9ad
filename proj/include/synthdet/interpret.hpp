#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "synthdet/detector.hpp"
#include "synthdet/image.hpp"

namespace synthdet {

enum class HeatmapMethod { Saliency, Occlusion };
const char* heatmap_method_name(HeatmapMethod m);

// Attribution grid over the input. `raw` keeps the signed per-pixel scores;
// `values` is the non-negative view: raw clamped at zero then scaled into
// [0,1] by the recorded mapping (value = max(raw,0) / max(raw_max, 0); all
// zeros when nothing is positive).
struct Heatmap {
  int width = 0;
  int height = 0;
  std::vector<double> raw;
  std::vector<double> values;
  HeatmapMethod method = HeatmapMethod::Saliency;
  int target_class = 0;
  double raw_min = 0.0;
  double raw_max = 0.0;
  nlohmann::json params = nlohmann::json::object();

  double raw_at(int y, int x) const { return raw[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

// Channel-max |gradient| per pixel. The gradient-image form exists so stub
// scorers (linear functionals) can be checked directly.
Heatmap saliency_from_gradient(const Image& gradient, int target_class);
Heatmap saliency_map(const DetectorModel& model, const Image& image,
                     int target_class, Exec exec = Exec::Parallel);

struct OcclusionParams {
  int window = 0;        // 0: resolution / 8
  int stride = 0;        // 0: window / 2 (min 1)
  double fill_value = 0.5;
};

using ScoreFn = std::function<double(const Image&)>;

// Slides a window of fill_value over the image; each pixel's raw value is
// the mean score drop (original minus occluded) over the windows covering
// it. Window evaluations run in parallel; aggregation order is fixed.
Heatmap occlusion_map_scored(const ScoreFn& score, const Image& image,
                             int target_class, OcclusionParams params = {});
Heatmap occlusion_map(const DetectorModel& model, const Image& image,
                      int target_class, OcclusionParams params = {},
                      Exec exec = Exec::Parallel);

// First (x, y) attaining the maximum raw value, row-major scan.
std::pair<int, int> heatmap_argmax(const Heatmap& map);

nlohmann::json heatmap_json(const Heatmap& map);

// PNG overlay: colormap alpha-blended over the grayscale underlay (an
// all-zero map reproduces the grayscale underlay exactly), plus a JSON
// sidecar at <png_path>.json with the raw grid, method, and parameters.
void render_heatmap(const Heatmap& map, const Image& underlay,
                    const std::string& png_path);

}  // namespace synthdet
