#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "neid/adam.hpp"
#include "neid/checkpoint.hpp"
#include "neid/dataset.hpp"
#include "neid/losses.hpp"
#include "neid/metrics.hpp"
#include "neid/model.hpp"

namespace neid {

/// Piecewise-constant schedule; a boundary epoch adopts its new rate.
struct LrSchedule {
  struct Drop {
    int epoch;
    double lr;
  };
  double base = 1e-4;
  std::vector<Drop> drops = {{500, 1e-5}, {1000, 1e-6}};

  void validate() const;
};

double lr_at(int epoch, const LrSchedule& schedule);

enum class EvalMode { patch, full_image };

struct TrainConfig {
  int epochs = 2000;
  int batch_size = 8;
  LrSchedule lr;
  AdamHyper adam;
  std::uint64_t seed = 0;
  ArchConfig arch;
  LossConfig loss;
  int steps_per_epoch = 0;  // 0 -> ceil(#train / batch_size)
  int eval_every = 50;      // epochs between eval passes; 0 disables evals
  double clip_norm = 0.0;   // 0 disables gradient clipping
  int patch = 256;
  EvalMode eval_mode = EvalMode::full_image;

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
  static TrainConfig from_json_file(const std::filesystem::path& path);
};

/// Applies fn to each low image and scores the result against the
/// normal-light reference. Per-image work is parallel; results land at
/// fixed indices. quantize applies the 8-bit round trip before scoring.
using EnhanceFn = std::function<Image(const Image&)>;
MetricsReport evaluate_with(const std::vector<PairedSample>& samples,
                            const EnhanceFn& fn, bool quantize = false);

/// Full-image inference pipeline. Default path: reflect-pad so that after
/// the x0.5 downsample the network sees multiples of 2^levels, downsample,
/// run, crop back to the input geometry. With no_downsample the image is
/// fed directly (padded to 2^levels) and the output is 2x the input size.
using ForwardFn = std::function<Tensor<float>(const Tensor<float>&)>;
Image enhance_full_image(const Image& low, int levels, const ForwardFn& forward,
                         bool no_downsample = false);

MetricsReport evaluate_params(const ParamMap<float>& params, const ArchConfig& arch,
                              const std::vector<PairedSample>& samples,
                              EvalMode mode, bool quantize = false, int patch = 256);

/// Scores a checkpoint. When expected_arch is given its fingerprint must
/// match the checkpoint's; otherwise FingerprintMismatch.
MetricsReport evaluate(const Checkpoint& ckpt,
                       const std::vector<PairedSample>& samples, EvalMode mode,
                       bool quantize = false,
                       const std::optional<ArchConfig>& expected_arch = std::nullopt);

/// End-to-end optimization. Writes out_dir/logs/loss.jsonl (one JSON line
/// per step), out_dir/reports/eval_epoch%04d.json at every eval point, and
/// out_dir/checkpoints/{latest,best}. Fully seeded: identical config and
/// dataset give a bit-identical loss trace; resuming from a checkpoint
/// continues the uninterrupted trace exactly. Throws NonFiniteLoss as soon
/// as any loss component stops being finite (after logging the step).
Checkpoint train(const TrainConfig& cfg,
                 const std::vector<PairedSample>& train_samples,
                 const std::vector<PairedSample>& eval_samples,
                 const std::filesystem::path& out_dir,
                 const std::filesystem::path& resume_from = {});

}  // namespace neid
