#pragma once

#include <memory>
#include <string>
#include <vector>

#include "synthdet/generator.hpp"
#include "synthdet/image.hpp"
#include "synthdet/kernels.hpp"

namespace synthdet {

// Which image pair produced a swapped image. Pairs are always consecutive:
// the i-th image is the identity source, the (i+1)-th the target.
struct SwapProvenance {
  int source_index = 0;
  int target_index = 1;
  std::string backend_id;
};

struct SwappedBatch {
  std::vector<Image> images;      // N-1 entries
  std::vector<SwapProvenance> provenance;
  GeneratorSpec parent_spec;
};

class SwapBackend {
 public:
  virtual ~SwapBackend() = default;
  virtual std::string id() const = 0;
  virtual Image swap(const Image& source, const Image& target) const = 0;
};

// The face region every built-in backend operates on: an ellipse at the image
// center with semi-axes 0.30*W and 0.40*H. The toy renderer always places the
// face inside it, so no landmark detection is needed.
kernels::OvalMask face_oval(int width, int height);

// Consecutive-pair swap scheme: output[i] = swap(batch[i], batch[i+1]) for
// i in [0, N-2]. Pairs run independently; outputs are reassembled in index
// order.
SwappedBatch pair_swap_batch(const SyntheticBatch& batch,
                             const SwapBackend& backend);

// Same scheme over a bare image collection (used for test-set construction).
std::vector<Image> pair_swap_images(const std::vector<Image>& images,
                                    const SwapBackend& backend);

// Pastes the source face oval onto the target through a feathered alpha mask
// (linear falloff band, 8% of image width, inside the oval boundary). Pixels
// outside the oval are bit-identical to the target.
class BlendSwap final : public SwapBackend {
 public:
  std::string id() const override { return "blend"; }
  Image swap(const Image& source, const Image& target) const override;
};

// Transfers per-channel mean/stddev of the source face region onto the target
// face region, then pastes the source eye and mouth sub-regions with feathered
// alpha. Falls back to a pure mean shift when the target region has zero
// variance. Artifacts are statistically distinct from BlendSwap.
class RecolorSwap final : public SwapBackend {
 public:
  std::string id() const override { return "recolor"; }
  Image swap(const Image& source, const Image& target) const override;
};

// Adapter contract: <command> --source A.png --target B.png --out OUT.png.
// Relative commands resolve against $SYNTHDET_ADAPTER_PATH.
class ExternalSwap final : public SwapBackend {
 public:
  explicit ExternalSwap(std::string command);
  std::string id() const override { return "external:" + command_; }
  Image swap(const Image& source, const Image& target) const override;

 private:
  std::string command_;
};

// Factory: "blend", "recolor", or "external:<command>".
std::unique_ptr<SwapBackend> make_swap_backend(const std::string& name);

}  // namespace synthdet
