#pragma once

#include <cstdint>

#include "synthdet/common.hpp"

namespace synthdet::kernels {

// Activation used by the conv stack.
enum class Act { Relu, LeakyRelu, Tanh };

// Feathered elliptical mask. alpha = 1 in the interior, linear falloff to 0
// across a band ending at the ellipse boundary, exactly 0 outside.
struct OvalMask {
  double cx, cy;      // center, pixel units
  double a, b;        // semi-axes, pixel units
  double feather;     // falloff band width in normalized-radius units
  double alpha(double x, double y) const;
};

// All kernels exist in a serial reference variant and an OpenMP variant.
// The parallel variants only split loops over independent output elements,
// so both produce bit-identical results for any thread count. Tests hold the
// two variants to exact equality; the bench tool times them side by side.
//
// Tensor layout: planar, index = (c*H + y)*W + x. Convolutions are 3x3,
// stride 1, zero-padded by 1.

#define SYNTHDET_KERNEL_DECLS                                                  \
  void conv2d_forward(const double* in, int cin, int h, int w,                 \
                      const double* weights, const double* bias, int cout,     \
                      double* out);                                            \
  void conv2d_backward_input(const double* dout, int cout, int h, int w,       \
                             const double* weights, int cin, double* din);     \
  void conv2d_backward_weights(const double* in, int cin, int h, int w,        \
                               const double* dout, int cout, double* dweights, \
                               double* dbias);                                 \
  void activation_forward(const double* in, std::int64_t n, Act act,           \
                          double* out);                                        \
  void activation_backward(const double* dout, const double* out,              \
                           std::int64_t n, Act act, double* din);              \
  void avgpool2_forward(const double* in, int c, int h, int w, double* out);   \
  void avgpool2_backward(const double* dout, int c, int h, int w,              \
                         double* din);                                         \
  void bilinear_resize(const double* in, int in_w, int in_h, double* out,      \
                       int out_w, int out_h);                                  \
  void oval_feather_blend(const double* src, const double* tgt, int w, int h,  \
                          const OvalMask& mask, double* out);                  \
  void affine_recolor_region(const double* tgt, int w, int h,                  \
                             const OvalMask& region, const double* scale,      \
                             const double* shift, double* out);

namespace serial {
SYNTHDET_KERNEL_DECLS
}
namespace par {
SYNTHDET_KERNEL_DECLS
}

#undef SYNTHDET_KERNEL_DECLS

// Dispatch helpers.
void conv2d_forward(const double* in, int cin, int h, int w,
                    const double* weights, const double* bias, int cout,
                    double* out, Exec exec);
void conv2d_backward_input(const double* dout, int cout, int h, int w,
                           const double* weights, int cin, double* din,
                           Exec exec);
void conv2d_backward_weights(const double* in, int cin, int h, int w,
                             const double* dout, int cout, double* dweights,
                             double* dbias, Exec exec);
void activation_forward(const double* in, std::int64_t n, Act act, double* out,
                        Exec exec);
void activation_backward(const double* dout, const double* out, std::int64_t n,
                         Act act, double* din, Exec exec);
void avgpool2_forward(const double* in, int c, int h, int w, double* out,
                      Exec exec);
void avgpool2_backward(const double* dout, int c, int h, int w, double* din,
                       Exec exec);
void bilinear_resize(const double* in, int in_w, int in_h, double* out,
                     int out_w, int out_h, Exec exec);
void oval_feather_blend(const double* src, const double* tgt, int w, int h,
                        const OvalMask& mask, double* out, Exec exec);
void affine_recolor_region(const double* tgt, int w, int h,
                           const OvalMask& region, const double* scale,
                           const double* shift, double* out, Exec exec);

// Per-channel mean/stddev over the pixels inside `region`. Serial reduction
// in row-major pixel order; kept out of the parallel set so results do not
// depend on summation order. Returns the pixel count of the region.
std::int64_t region_moments(const double* img, int w, int h,
                            const OvalMask& region, double mean[3],
                            double stddev[3]);

}  // namespace synthdet::kernels
