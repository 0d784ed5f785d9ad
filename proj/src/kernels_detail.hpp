#pragma once

// Per-element bodies shared by the serial and OpenMP kernel variants.
// Keeping the arithmetic in one place guarantees both variants evaluate the
// exact same expression for each output element.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "synthdet/kernels.hpp"

namespace synthdet::kernels::detail {

inline std::int64_t idx3(int c, int y, int x, int h, int w) {
  return (static_cast<std::int64_t>(c) * h + y) * w + x;
}

// out(co, y, x) for a 3x3 zero-padded convolution.
inline double conv_out_element(const double* in, int cin, int h, int w,
                               const double* weights, const double* bias,
                               int co, int y, int x) {
  double acc = bias[co];
  for (int ci = 0; ci < cin; ++ci) {
    const double* wplane = weights + (static_cast<std::int64_t>(co) * cin + ci) * 9;
    for (int ky = 0; ky < 3; ++ky) {
      const int iy = y + ky - 1;
      if (iy < 0 || iy >= h) continue;
      for (int kx = 0; kx < 3; ++kx) {
        const int ix = x + kx - 1;
        if (ix < 0 || ix >= w) continue;
        acc += in[idx3(ci, iy, ix, h, w)] * wplane[ky * 3 + kx];
      }
    }
  }
  return acc;
}

// din(ci, iy, ix): scatter of dout through the transposed kernel.
inline double conv_din_element(const double* dout, int cout, int h, int w,
                               const double* weights, int cin, int ci, int iy,
                               int ix) {
  double acc = 0.0;
  for (int co = 0; co < cout; ++co) {
    const double* wplane = weights + (static_cast<std::int64_t>(co) * cin + ci) * 9;
    for (int ky = 0; ky < 3; ++ky) {
      const int oy = iy - ky + 1;
      if (oy < 0 || oy >= h) continue;
      for (int kx = 0; kx < 3; ++kx) {
        const int ox = ix - kx + 1;
        if (ox < 0 || ox >= w) continue;
        acc += dout[idx3(co, oy, ox, h, w)] * wplane[ky * 3 + kx];
      }
    }
  }
  return acc;
}

// dw(co, ci, ky, kx): correlation of input with dout.
inline double conv_dw_element(const double* in, [[maybe_unused]] int cin,
                              int h, int w, const double* dout, int co,
                              int ci, int ky, int kx) {
  double acc = 0.0;
  for (int y = 0; y < h; ++y) {
    const int iy = y + ky - 1;
    if (iy < 0 || iy >= h) continue;
    for (int x = 0; x < w; ++x) {
      const int ix = x + kx - 1;
      if (ix < 0 || ix >= w) continue;
      acc += dout[idx3(co, y, x, h, w)] * in[idx3(ci, iy, ix, h, w)];
    }
  }
  return acc;
}

inline double conv_db_element(const double* dout, int co, int h, int w) {
  double acc = 0.0;
  const double* plane = dout + static_cast<std::int64_t>(co) * h * w;
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(h) * w; ++i)
    acc += plane[i];
  return acc;
}

constexpr double kLeakySlope = 0.1;

inline double act_fwd(double v, Act act) {
  switch (act) {
    case Act::Relu:
      return v > 0.0 ? v : 0.0;
    case Act::LeakyRelu:
      return v > 0.0 ? v : kLeakySlope * v;
    default:
      return std::tanh(v);
  }
}

// Backward recovers the branch from the output sign; leaky keeps it since
// out > 0 iff in > 0.
inline double act_bwd(double dout, double out, Act act) {
  switch (act) {
    case Act::Relu:
      return out > 0.0 ? dout : 0.0;
    case Act::LeakyRelu:
      return out > 0.0 ? dout : kLeakySlope * dout;
    default:
      return dout * (1.0 - out * out);
  }
}

inline double pool_out_element(const double* in, int c, int y, int x, int h,
                               int w) {
  const std::int64_t base = idx3(c, 2 * y, 2 * x, h, w);
  return 0.25 * (in[base] + in[base + 1] + in[base + w] + in[base + w + 1]);
}

// Bilinear sample of the source grid at fractional output coordinates, edge
// clamped, aspect ratio not preserved.
inline double resize_element(const double* in, int in_w, int in_h, int c,
                             int oy, int ox, int out_w, int out_h) {
  const double sx = (ox + 0.5) * in_w / out_w - 0.5;
  const double sy = (oy + 0.5) * in_h / out_h - 0.5;
  const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, in_w - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, in_h - 1);
  const int x1 = std::min(x0 + 1, in_w - 1);
  const int y1 = std::min(y0 + 1, in_h - 1);
  const double fx = std::clamp(sx - x0, 0.0, 1.0);
  const double fy = std::clamp(sy - y0, 0.0, 1.0);
  const double v00 = in[idx3(c, y0, x0, in_h, in_w)];
  const double v01 = in[idx3(c, y0, x1, in_h, in_w)];
  const double v10 = in[idx3(c, y1, x0, in_h, in_w)];
  const double v11 = in[idx3(c, y1, x1, in_h, in_w)];
  const double top = v00 + (v01 - v00) * fx;
  const double bot = v10 + (v11 - v10) * fx;
  return top + (bot - top) * fy;
}

inline double blend_element(const double* src, const double* tgt, int w, int h,
                            const OvalMask& mask, int c, int y, int x) {
  const double a = mask.alpha(x, y);
  const std::int64_t i = idx3(c, y, x, h, w);
  // alpha == 0 must reproduce the target bit-exactly.
  if (a <= 0.0) return tgt[i];
  if (a >= 1.0) return src[i];
  return tgt[i] + a * (src[i] - tgt[i]);
}

inline double recolor_element(const double* tgt, int w, int h,
                              const OvalMask& region, const double* scale,
                              const double* shift, int c, int y, int x) {
  const std::int64_t i = idx3(c, y, x, h, w);
  if (region.alpha(x, y) <= 0.0) return tgt[i];
  double v = tgt[i] * scale[c] + shift[c];
  return std::min(1.0, std::max(0.0, v));
}

}  // namespace synthdet::kernels::detail
