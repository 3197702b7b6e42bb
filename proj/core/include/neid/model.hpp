#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "neid/ops.hpp"
#include "neid/rng.hpp"
#include "neid/tensor.hpp"

namespace neid {

enum class Variant { unet_baseline, le_only, le_dr, full };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

/// Network capacity and wiring. Per-level encoder channels are
/// base_channels << level; the bottleneck sits at 1 / 2^levels resolution.
struct ArchConfig {
  int levels = 4;
  int base_channels = 32;
  int scale = 2;  // the only validated upscaling factor
  Variant variant = Variant::full;

  void validate() const;
  int channels(int level) const { return base_channels << level; }
  int bottleneck_channels() const { return base_channels << (levels - 1); }
  int divisor() const { return 1 << levels; }

  /// FNV-1a hash of the canonical config string; stored in checkpoints.
  std::uint64_t fingerprint() const;
  std::string canonical() const;

  bool has_dr() const { return variant == Variant::le_dr || variant == Variant::full; }
  bool has_ff() const { return variant == Variant::full; }

  bool operator==(const ArchConfig&) const = default;
};

enum class Mode { train, infer };

template <typename T>
struct ModelOutputs {
  Tensor<T> le_image;                   // N x 3 x 2H x 2W, in (0, 1)
  std::optional<Tensor<T>> dr_image;    // train mode with a DR branch only
  Tensor<T> dr_features;                // empty when the DR decoder did not run
};

/// Everything forward() computed that backward() needs.
template <typename T>
struct ForwardCache {
  Tensor<T> input;
  // Encoder, indexed by level.
  std::vector<Tensor<T>> enc_in;   // input to the level's first conv
  std::vector<Tensor<T>> enc_a1;   // post-ReLU conv1
  std::vector<Tensor<T>> enc_a2;   // post-ReLU conv2 == skip
  std::vector<std::vector<std::int32_t>> pool_argmax;
  std::vector<Tensor<T>> pooled;   // pooled.back() is the bottleneck
  // Decoders, indexed by level (forward runs levels-1 .. 0).
  struct Branch {
    std::vector<Tensor<T>> up_in;  // input to the level's transposed conv
    std::vector<Tensor<T>> cat;    // concat(skip, upsampled)
    std::vector<Tensor<T>> a1;
    std::vector<Tensor<T>> a2;     // a2[0] is the branch's feature output
  };
  Branch le, dr;
  // Feature fusing.
  Tensor<T> ff_squeeze;                 // N x C0 x 1 x 1
  Tensor<T> ff_e1;                      // post-ReLU fc1
  Tensor<T> ff_w;                       // sigmoid fc2, the channel weights
  std::vector<Tensor<T>> ff_proj_in;    // input to each strided conv
  std::vector<Tensor<T>> ff_proj_out;   // post-ReLU outputs
  Tensor<T> fused;
};

/// The two-stream enhancement network: shared encoder, light-enhancement
/// decoder with a sub-pixel x2 head, detail-refinement decoder with its own
/// head, and a channel-attention fusing module between them. All passes are
/// pure functions of (params, input); parameters only change between steps.
template <typename T>
class Model {
 public:
  explicit Model(const ArchConfig& cfg);

  const ArchConfig& config() const { return cfg_; }

  /// Stable parameter names with their shapes, in initialization order.
  struct ParamSpec {
    std::string name;
    int n, c, h, w;  // biases use n x 1 x 1 x 1
    bool is_bias;
  };
  std::vector<ParamSpec> param_schema() const;

  /// Weights ~ N(0, 0.02^2); biases 0.
  ParamMap<T> init_params(Rng& rng) const;

  struct EncodeResult {
    std::vector<Tensor<T>> skips;
    Tensor<T> bottleneck;
  };
  EncodeResult encode(const ParamMap<T>& params, const Tensor<T>& x) const;

  /// Channel-attention fusion of the bottleneck with projected DR features.
  Tensor<T> ff_fuse(const ParamMap<T>& params, const Tensor<T>& bottleneck,
                    const Tensor<T>& dr_features) const;

  /// Input must be N x 3 x H x W with H, W divisible by 2^levels. In infer
  /// mode the DR image head is skipped; the DR decoder itself still runs
  /// when the fusing module needs its features (variant full).
  ModelOutputs<T> forward(const ParamMap<T>& params, const Tensor<T>& x,
                          Mode mode, ForwardCache<T>* cache = nullptr) const;

  /// Parameter gradients for upstream grads on the outputs. grad_dr may be
  /// null (no DR image loss). The returned map carries every parameter of
  /// the variant, zero-filled where no gradient flows.
  ParamMap<T> backward(const ParamMap<T>& params, const ForwardCache<T>& cache,
                       const ModelOutputs<T>& outputs, const Tensor<T>& grad_le,
                       const Tensor<T>* grad_dr) const;

 private:
  ArchConfig cfg_;

  const Tensor<T>& p(const ParamMap<T>& params, const std::string& name) const;
  std::vector<T> bias_vec(const ParamMap<T>& params, const std::string& name) const;

  /// Channel width after projection step k of the fusing module.
  int proj_channels(int k) const;

  void decode_branch(const ParamMap<T>& params, const std::string& prefix,
                     const Tensor<T>& entry,
                     const std::vector<Tensor<T>>& skips,
                     typename ForwardCache<T>::Branch& cache) const;

  /// Returns the gradient w.r.t. the branch entry tensor and accumulates
  /// parameter and skip gradients.
  Tensor<T> decode_branch_backward(const ParamMap<T>& params,
                                   const std::string& prefix,
                                   const typename ForwardCache<T>::Branch& cache,
                                   const Tensor<T>& grad_features,
                                   std::vector<Tensor<T>>& grad_skips,
                                   ParamMap<T>& grads) const;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace neid
