// Times each compute kernel's serial reference against the OpenMP variant
// and checks that the two agree bit for bit.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "synthdet/image.hpp"
#include "synthdet/kernels.hpp"
#include "synthdet/rng.hpp"

using namespace synthdet;
namespace k = kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_ms, double par_ms, bool match) {
  std::printf("%-24s %10.3f %10.3f %8.2fx   %s\n", name, serial_ms, par_ms,
              serial_ms / par_ms, match ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
  const int res = 256, cin = 8, cout = 16;
  const int reps = 5;

  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-24s %10s %10s %9s\n", "kernel", "serial ms", "omp ms",
              "speedup");

  const auto in = random_vec(static_cast<std::size_t>(cin) * res * res, 1);
  const auto w = random_vec(static_cast<std::size_t>(cout) * cin * 9, 2);
  const auto b = random_vec(cout, 3);
  std::vector<double> out_s(static_cast<std::size_t>(cout) * res * res);
  std::vector<double> out_p(out_s.size());

  {
    const double ts = time_ms([&] {
      k::serial::conv2d_forward(in.data(), cin, res, res, w.data(), b.data(),
                                cout, out_s.data());
    }, reps);
    const double tp = time_ms([&] {
      k::par::conv2d_forward(in.data(), cin, res, res, w.data(), b.data(),
                             cout, out_p.data());
    }, reps);
    report("conv2d_forward", ts, tp, out_s == out_p);
  }
  {
    const auto dout = random_vec(out_s.size(), 4);
    std::vector<double> din_s(in.size()), din_p(in.size());
    const double ts = time_ms([&] {
      k::serial::conv2d_backward_input(dout.data(), cout, res, res, w.data(),
                                       cin, din_s.data());
    }, reps);
    const double tp = time_ms([&] {
      k::par::conv2d_backward_input(dout.data(), cout, res, res, w.data(),
                                    cin, din_p.data());
    }, reps);
    report("conv2d_backward_input", ts, tp, din_s == din_p);
  }
  {
    const auto dout = random_vec(out_s.size(), 5);
    std::vector<double> dw_s(w.size()), dw_p(w.size());
    std::vector<double> db_s(b.size()), db_p(b.size());
    const double ts = time_ms([&] {
      k::serial::conv2d_backward_weights(in.data(), cin, res, res, dout.data(),
                                         cout, dw_s.data(), db_s.data());
    }, reps);
    const double tp = time_ms([&] {
      k::par::conv2d_backward_weights(in.data(), cin, res, res, dout.data(),
                                      cout, dw_p.data(), db_p.data());
    }, reps);
    report("conv2d_backward_weights", ts, tp, dw_s == dw_p && db_s == db_p);
  }
  {
    std::vector<double> act_s(out_s.size()), act_p(out_s.size());
    const double ts = time_ms([&] {
      k::serial::activation_forward(out_s.data(), out_s.size(), k::Act::Tanh,
                                    act_s.data());
    }, reps);
    const double tp = time_ms([&] {
      k::par::activation_forward(out_s.data(), out_s.size(), k::Act::Tanh,
                                 act_p.data());
    }, reps);
    report("activation_forward", ts, tp, act_s == act_p);
  }
  {
    std::vector<double> pool_s(static_cast<std::size_t>(cin) * (res / 2) * (res / 2));
    std::vector<double> pool_p(pool_s.size());
    const double ts = time_ms([&] {
      k::serial::avgpool2_forward(in.data(), cin, res, res, pool_s.data());
    }, reps);
    const double tp = time_ms([&] {
      k::par::avgpool2_forward(in.data(), cin, res, res, pool_p.data());
    }, reps);
    report("avgpool2_forward", ts, tp, pool_s == pool_p);
  }
  {
    Image a(res, res), bimg(res, res);
    Rng rng(7);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
          a.at(c, y, x) = rng.uniform();
          bimg.at(c, y, x) = rng.uniform();
        }
    const k::OvalMask mask{res / 2.0, res / 2.0, 0.3 * res, 0.4 * res, 0.2};
    Image out_sb(res, res), out_pb(res, res);
    const double ts = time_ms([&] {
      k::serial::oval_feather_blend(a.data(), bimg.data(), res, res, mask,
                                    out_sb.data());
    }, reps);
    const double tp = time_ms([&] {
      k::par::oval_feather_blend(a.data(), bimg.data(), res, res, mask,
                                 out_pb.data());
    }, reps);
    report("oval_feather_blend", ts, tp, out_sb == out_pb);

    std::vector<double> rs(static_cast<std::size_t>(3) * 192 * 192);
    std::vector<double> rp(rs.size());
    const double ts2 = time_ms([&] {
      k::serial::bilinear_resize(a.data(), res, res, rs.data(), 192, 192);
    }, reps);
    const double tp2 = time_ms([&] {
      k::par::bilinear_resize(a.data(), res, res, rp.data(), 192, 192);
    }, reps);
    report("bilinear_resize", ts2, tp2, rs == rp);
  }
  return 0;
}
