#include "kernels_detail.hpp"

namespace synthdet::kernels {

double OvalMask::alpha(double x, double y) const {
  const double dx = (x - cx) / a;
  const double dy = (y - cy) / b;
  const double rho = std::sqrt(dx * dx + dy * dy);
  if (rho >= 1.0) return 0.0;
  const double d = 1.0 - rho;
  if (d >= feather) return 1.0;
  return d / feather;
}

namespace serial {

void conv2d_forward(const double* in, int cin, int h, int w,
                    const double* weights, const double* bias, int cout,
                    double* out) {
  for (int co = 0; co < cout; ++co)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out[detail::idx3(co, y, x, h, w)] =
            detail::conv_out_element(in, cin, h, w, weights, bias, co, y, x);
}

void conv2d_backward_input(const double* dout, int cout, int h, int w,
                           const double* weights, int cin, double* din) {
  for (int ci = 0; ci < cin; ++ci)
    for (int iy = 0; iy < h; ++iy)
      for (int ix = 0; ix < w; ++ix)
        din[detail::idx3(ci, iy, ix, h, w)] =
            detail::conv_din_element(dout, cout, h, w, weights, cin, ci, iy, ix);
}

void conv2d_backward_weights(const double* in, int cin, int h, int w,
                             const double* dout, int cout, double* dweights,
                             double* dbias) {
  for (int co = 0; co < cout; ++co) {
    for (int ci = 0; ci < cin; ++ci)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx)
          dweights[((static_cast<std::int64_t>(co) * cin + ci) * 3 + ky) * 3 + kx] =
              detail::conv_dw_element(in, cin, h, w, dout, co, ci, ky, kx);
    dbias[co] = detail::conv_db_element(dout, co, h, w);
  }
}

void activation_forward(const double* in, std::int64_t n, Act act,
                        double* out) {
  for (std::int64_t i = 0; i < n; ++i) out[i] = detail::act_fwd(in[i], act);
}

void activation_backward(const double* dout, const double* out, std::int64_t n,
                         Act act, double* din) {
  for (std::int64_t i = 0; i < n; ++i)
    din[i] = detail::act_bwd(dout[i], out[i], act);
}

void avgpool2_forward(const double* in, int c, int h, int w, double* out) {
  const int oh = h / 2, ow = w / 2;
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        out[detail::idx3(ch, y, x, oh, ow)] =
            detail::pool_out_element(in, ch, y, x, h, w);
}

void avgpool2_backward(const double* dout, int c, int h, int w, double* din) {
  const int oh = h / 2, ow = w / 2;
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
  for (int c = 0; c < 3; ++c)
    for (int oy = 0; oy < out_h; ++oy)
      for (int ox = 0; ox < out_w; ++ox)
        out[detail::idx3(c, oy, ox, out_h, out_w)] =
            detail::resize_element(in, in_w, in_h, c, oy, ox, out_w, out_h);
}

void oval_feather_blend(const double* src, const double* tgt, int w, int h,
                        const OvalMask& mask, double* out) {
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out[detail::idx3(c, y, x, h, w)] =
            detail::blend_element(src, tgt, w, h, mask, c, y, x);
}

void affine_recolor_region(const double* tgt, int w, int h,
                           const OvalMask& region, const double* scale,
                           const double* shift, double* out) {
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out[detail::idx3(c, y, x, h, w)] =
            detail::recolor_element(tgt, w, h, region, scale, shift, c, y, x);
}

}  // namespace serial

std::int64_t region_moments(const double* img, int w, int h,
                            const OvalMask& region, double mean[3],
                            double stddev[3]) {
  double sum[3] = {0, 0, 0};
  double sumsq[3] = {0, 0, 0};
  std::int64_t n = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (region.alpha(x, y) <= 0.0) continue;
      ++n;
      for (int c = 0; c < 3; ++c) {
        const double v = img[detail::idx3(c, y, x, h, w)];
        sum[c] += v;
        sumsq[c] += v * v;
      }
    }
  for (int c = 0; c < 3; ++c) {
    if (n == 0) {
      mean[c] = 0.0;
      stddev[c] = 0.0;
      continue;
    }
    mean[c] = sum[c] / n;
    const double var = std::max(0.0, sumsq[c] / n - mean[c] * mean[c]);
    stddev[c] = std::sqrt(var);
  }
  return n;
}

}  // namespace synthdet::kernels
