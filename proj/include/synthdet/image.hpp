#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "synthdet/common.hpp"

namespace synthdet {

// Square or rectangular RGB image, planar layout, values in [0,1].
// Channel plane c is a contiguous H*W block: index = (c*H + y)*W + x.
class Image {
 public:
  Image() = default;
  Image(int width, int height)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height * 3, 0.0) {
    if (width <= 0 || height <= 0)
      throw ValidationError("image dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }

  double& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  double at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }

  double* plane(int c) {
    return data_.data() + static_cast<std::size_t>(c) * height_ * width_;
  }
  const double* plane(int c) const {
    return data_.data() + static_cast<std::size_t>(c) * height_ * width_;
  }

  bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  bool operator==(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           data_ == other.data_;
  }

  void clamp01();

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

// 8-bit RGB PNG I/O. Writing quantizes with round(v*255) after clamping;
// reading maps v/255. Both directions are deterministic.
void write_png(const Image& img, const std::string& path);
Image read_png(const std::string& path);

// Non-aspect-preserving bilinear resample to (out_w, out_h).
Image bilinear_resize(const Image& src, int out_w, int out_h, Exec exec = Exec::Parallel);

// Rec.601 luma, returned as a grayscale RGB image (all planes equal).
Image to_grayscale(const Image& src);

// Largest absolute per-pixel difference across all planes.
double max_abs_diff(const Image& a, const Image& b);

// Mean absolute per-pixel difference across all planes.
double mean_abs_diff(const Image& a, const Image& b);

}  // namespace synthdet
