#include "synthdet/swapper.hpp"

#include <cmath>
#include <filesystem>
#include <unistd.h>

#include "subprocess.hpp"

namespace synthdet {

namespace fs = std::filesystem;

kernels::OvalMask face_oval(int width, int height) {
  kernels::OvalMask mask;
  mask.cx = 0.5 * width;
  mask.cy = 0.5 * height;
  mask.a = 0.30 * width;
  mask.b = 0.40 * height;
  // 8% of W expressed in normalized-radius units along the x semi-axis.
  mask.feather = 0.08 * width / mask.a;
  return mask;
}

namespace {

void check_same_resolution(const Image& source, const Image& target) {
  if (!source.same_shape(target))
    throw ValidationError("swap source/target resolution mismatch: " +
                          std::to_string(source.width()) + "x" +
                          std::to_string(source.height()) + " vs " +
                          std::to_string(target.width()) + "x" +
                          std::to_string(target.height()));
}

kernels::OvalMask sub_region(int w, int h, double fx, double fy, double frx,
                             double fry, double feather_frac) {
  kernels::OvalMask m;
  m.cx = fx * w;
  m.cy = fy * h;
  m.a = frx * w;
  m.b = fry * h;
  m.feather = feather_frac * w / m.a;
  return m;
}

}  // namespace

Image BlendSwap::swap(const Image& source, const Image& target) const {
  check_same_resolution(source, target);
  const auto mask = face_oval(target.width(), target.height());
  Image out(target.width(), target.height());
  kernels::oval_feather_blend(source.data(), target.data(), target.width(),
                              target.height(), mask, out.data(),
                              Exec::Parallel);
  return out;
}

Image RecolorSwap::swap(const Image& source, const Image& target) const {
  check_same_resolution(source, target);
  const int w = target.width(), h = target.height();
  const auto region = face_oval(w, h);

  double src_mean[3], src_std[3], tgt_mean[3], tgt_std[3];
  kernels::region_moments(source.data(), w, h, region, src_mean, src_std);
  kernels::region_moments(target.data(), w, h, region, tgt_mean, tgt_std);

  double scale[3], shift[3];
  for (int c = 0; c < 3; ++c) {
    if (tgt_std[c] > 1e-12) {
      scale[c] = src_std[c] / tgt_std[c];
    } else {
      scale[c] = 1.0;  // zero-variance region: mean shift only
    }
    shift[c] = src_mean[c] - tgt_mean[c] * scale[c];
  }

  Image out(w, h);
  kernels::affine_recolor_region(target.data(), w, h, region, scale, shift,
                                 out.data(), Exec::Parallel);

  // Feathered paste of the source eye and mouth areas. Positions are the
  // canonical toy-face layout; for arbitrary inputs they simply define where
  // this backend leaves its artifacts.
  const kernels::OvalMask paste_regions[3] = {
      sub_region(w, h, 0.5 - 0.11, 0.5 - 0.105, 0.075, 0.055, 0.02),
      sub_region(w, h, 0.5 + 0.11, 0.5 - 0.105, 0.075, 0.055, 0.02),
      sub_region(w, h, 0.5, 0.5 + 0.17, 0.11, 0.050, 0.02),
  };
  for (const auto& m : paste_regions) {
    Image next(w, h);
    kernels::oval_feather_blend(source.data(), out.data(), w, h, m,
                                next.data(), Exec::Parallel);
    out = std::move(next);
  }
  return out;
}

SwappedBatch pair_swap_batch(const SyntheticBatch& batch,
                             const SwapBackend& backend) {
  const int n = static_cast<int>(batch.images.size());
  if (n < 2)
    throw ValidationError("pair swapping needs a batch of at least 2 images");

  SwappedBatch out;
  out.parent_spec = batch.spec;
  out.images.resize(n - 1);
  out.provenance.resize(n - 1);

  std::string first_error;
  int first_error_pair = -1;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n - 1; ++i) {
    try {
      out.images[i] = backend.swap(batch.images[i], batch.images[i + 1]);
      out.provenance[i] = {i, i + 1, backend.id()};
    } catch (const std::exception& e) {
#pragma omp critical
      if (first_error_pair < 0 || i < first_error_pair) {
        first_error_pair = i;
        first_error = e.what();
      }
    }
  }
  if (first_error_pair >= 0)
    throw AdapterError("swap backend '" + backend.id() + "' failed on pair " +
                       std::to_string(first_error_pair) + ": " + first_error);
  return out;
}

std::vector<Image> pair_swap_images(const std::vector<Image>& images,
                                    const SwapBackend& backend) {
  const int n = static_cast<int>(images.size());
  if (n < 2)
    throw ValidationError("pair swapping needs at least 2 images");
  std::vector<Image> out(n - 1);
  std::string first_error;
  int first_error_pair = -1;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n - 1; ++i) {
    try {
      out[i] = backend.swap(images[i], images[i + 1]);
    } catch (const std::exception& e) {
#pragma omp critical
      if (first_error_pair < 0 || i < first_error_pair) {
        first_error_pair = i;
        first_error = e.what();
      }
    }
  }
  if (first_error_pair >= 0)
    throw AdapterError("swap backend '" + backend.id() + "' failed on pair " +
                       std::to_string(first_error_pair) + ": " + first_error);
  return out;
}

ExternalSwap::ExternalSwap(std::string command) : command_(std::move(command)) {
  if (command_.empty()) throw ConfigError("empty external swap command");
}

Image ExternalSwap::swap(const Image& source, const Image& target) const {
  check_same_resolution(source, target);

  detail::ScratchDir scratch("synthdet-swap-");

  const auto src_path = scratch.path / "source.png";
  const auto tgt_path = scratch.path / "target.png";
  const auto out_path = scratch.path / "swapped.png";
  write_png(source, src_path.string());
  write_png(target, tgt_path.string());

  const std::string cmd = detail::resolve_adapter_command(command_) +
                          " --source " + src_path.string() + " --target " +
                          tgt_path.string() + " --out " + out_path.string();
  const auto result = detail::run_command(cmd, scratch.path);
  if (result.exit_code != 0)
    throw AdapterError("external swap failed (exit " +
                       std::to_string(result.exit_code) + "): " +
                       result.stderr_tail);
  if (!fs::exists(out_path))
    throw AdapterError("external swap produced no output file; stderr: " +
                       result.stderr_tail);
  Image out = read_png(out_path.string());
  check_same_resolution(out, target);
  return out;
}

std::unique_ptr<SwapBackend> make_swap_backend(const std::string& name) {
  if (name == "blend") return std::make_unique<BlendSwap>();
  if (name == "recolor") return std::make_unique<RecolorSwap>();
  if (name.rfind("external:", 0) == 0)
    return std::make_unique<ExternalSwap>(name.substr(9));
  throw ConfigError("unknown swap backend '" + name +
                    "' (expected blend, recolor, or external:<command>)");
}

}  // namespace synthdet
