#include "kernels_detail.hpp"

// OpenMP variants. Every loop below is over independent output elements, so
// the results match the serial reference bit for bit at any thread count.

namespace synthdet::kernels {
namespace par {

void conv2d_forward(const double* in, int cin, int h, int w,
                    const double* weights, const double* bias, int cout,
                    double* out) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int co = 0; co < cout; ++co)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out[detail::idx3(co, y, x, h, w)] =
            detail::conv_out_element(in, cin, h, w, weights, bias, co, y, x);
}

void conv2d_backward_input(const double* dout, int cout, int h, int w,
                           const double* weights, int cin, double* din) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int ci = 0; ci < cin; ++ci)
    for (int iy = 0; iy < h; ++iy)
      for (int ix = 0; ix < w; ++ix)
        din[detail::idx3(ci, iy, ix, h, w)] =
            detail::conv_din_element(dout, cout, h, w, weights, cin, ci, iy, ix);
}

void conv2d_backward_weights(const double* in, int cin, int h, int w,
                             const double* dout, int cout, double* dweights,
                             double* dbias) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int co = 0; co < cout; ++co)
    for (int ci = 0; ci < cin; ++ci)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx)
          dweights[((static_cast<std::int64_t>(co) * cin + ci) * 3 + ky) * 3 + kx] =
              detail::conv_dw_element(in, cin, h, w, dout, co, ci, ky, kx);
#pragma omp parallel for schedule(static)
  for (int co = 0; co < cout; ++co)
    dbias[co] = detail::conv_db_element(dout, co, h, w);
}

void activation_forward(const double* in, std::int64_t n, Act act,
                        double* out) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) out[i] = detail::act_fwd(in[i], act);
}

void activation_backward(const double* dout, const double* out, std::int64_t n,
                         Act act, double* din) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i)
    din[i] = detail::act_bwd(dout[i], out[i], act);
}

void avgpool2_forward(const double* in, int c, int h, int w, double* out) {
  const int oh = h / 2, ow = w / 2;
#pragma omp parallel for collapse(2) schedule(static)
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        out[detail::idx3(ch, y, x, oh, ow)] =
            detail::pool_out_element(in, ch, y, x, h, w);
}

void avgpool2_backward(const double* dout, int c, int h, int w, double* din) {
  const int oh = h / 2, ow = w / 2;
#pragma omp parallel for collapse(2) schedule(static)
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        din[detail::idx3(ch, y, x, h, w)] =
            (y < 2 * oh && x < 2 * ow)
                ? 0.25 * dout[detail::idx3(ch, y / 2, x / 2, oh, ow)]
                : 0.0;
}

void bilinear_resize(const double* in, int in_w, int in_h, double* out,
                     int out_w, int out_h) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int c = 0; c < 3; ++c)
    for (int oy = 0; oy < out_h; ++oy)
      for (int ox = 0; ox < out_w; ++ox)
        out[detail::idx3(c, oy, ox, out_h, out_w)] =
            detail::resize_element(in, in_w, in_h, c, oy, ox, out_w, out_h);
}

void oval_feather_blend(const double* src, const double* tgt, int w, int h,
                        const OvalMask& mask, double* out) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out[detail::idx3(c, y, x, h, w)] =
            detail::blend_element(src, tgt, w, h, mask, c, y, x);
}

void affine_recolor_region(const double* tgt, int w, int h,
                           const OvalMask& region, const double* scale,
                           const double* shift, double* out) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out[detail::idx3(c, y, x, h, w)] =
            detail::recolor_element(tgt, w, h, region, scale, shift, c, y, x);
}

}  // namespace par

// Dispatchers.
#define SYNTHDET_DISPATCH(call_serial, call_par) \
  if (exec == Exec::Serial) {                    \
    call_serial;                                 \
  } else {                                       \
    call_par;                                    \
  }

void conv2d_forward(const double* in, int cin, int h, int w,
                    const double* weights, const double* bias, int cout,
                    double* out, Exec exec) {
  SYNTHDET_DISPATCH(
      serial::conv2d_forward(in, cin, h, w, weights, bias, cout, out),
      par::conv2d_forward(in, cin, h, w, weights, bias, cout, out))
}

void conv2d_backward_input(const double* dout, int cout, int h, int w,
                           const double* weights, int cin, double* din,
                           Exec exec) {
  SYNTHDET_DISPATCH(
      serial::conv2d_backward_input(dout, cout, h, w, weights, cin, din),
      par::conv2d_backward_input(dout, cout, h, w, weights, cin, din))
}

void conv2d_backward_weights(const double* in, int cin, int h, int w,
                             const double* dout, int cout, double* dweights,
                             double* dbias, Exec exec) {
  SYNTHDET_DISPATCH(serial::conv2d_backward_weights(in, cin, h, w, dout, cout,
                                                    dweights, dbias),
                    par::conv2d_backward_weights(in, cin, h, w, dout, cout,
                                                 dweights, dbias))
}

void activation_forward(const double* in, std::int64_t n, Act act, double* out,
                        Exec exec) {
  SYNTHDET_DISPATCH(serial::activation_forward(in, n, act, out),
                    par::activation_forward(in, n, act, out))
}

void activation_backward(const double* dout, const double* out, std::int64_t n,
                         Act act, double* din, Exec exec) {
  SYNTHDET_DISPATCH(serial::activation_backward(dout, out, n, act, din),
                    par::activation_backward(dout, out, n, act, din))
}

void avgpool2_forward(const double* in, int c, int h, int w, double* out,
                      Exec exec) {
  SYNTHDET_DISPATCH(serial::avgpool2_forward(in, c, h, w, out),
                    par::avgpool2_forward(in, c, h, w, out))
}

void avgpool2_backward(const double* dout, int c, int h, int w, double* din,
                       Exec exec) {
  SYNTHDET_DISPATCH(serial::avgpool2_backward(dout, c, h, w, din),
                    par::avgpool2_backward(dout, c, h, w, din))
}

void bilinear_resize(const double* in, int in_w, int in_h, double* out,
                     int out_w, int out_h, Exec exec) {
  SYNTHDET_DISPATCH(serial::bilinear_resize(in, in_w, in_h, out, out_w, out_h),
                    par::bilinear_resize(in, in_w, in_h, out, out_w, out_h))
}

void oval_feather_blend(const double* src, const double* tgt, int w, int h,
                        const OvalMask& mask, double* out, Exec exec) {
  SYNTHDET_DISPATCH(serial::oval_feather_blend(src, tgt, w, h, mask, out),
                    par::oval_feather_blend(src, tgt, w, h, mask, out))
}

void affine_recolor_region(const double* tgt, int w, int h,
                           const OvalMask& region, const double* scale,
                           const double* shift, double* out, Exec exec) {
  SYNTHDET_DISPATCH(
      serial::affine_recolor_region(tgt, w, h, region, scale, shift, out),
      par::affine_recolor_region(tgt, w, h, region, scale, shift, out))
}

#undef SYNTHDET_DISPATCH

}  // namespace synthdet::kernels
