#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "neid/image.hpp"
#include "neid/rng.hpp"
#include "neid/tensor.hpp"

namespace neid {

/// One low-light / normal-light pair of the same scene.
struct PairedSample {
  std::string id;
  std::filesystem::path low_path;
  std::filesystem::path high_path;
};

enum class DatasetLayout { generic, lol };

/// generic: root/low/*.png and root/high/*.png matched by filename; all
/// samples land in `train` and `eval` stays empty.
/// lol: root/our485/{low,high} fills `train`, root/eval15/{low,high} fills
/// `eval`. Ordering is lexicographic by id in both splits.
struct PairedDataset {
  std::vector<PairedSample> train;
  std::vector<PairedSample> eval;
};

PairedDataset scan_paired_dataset(const std::filesystem::path& root,
                                  DatasetLayout layout);

/// Training unit per draw: input is the bicubic-downsampled low-light patch,
/// target_le the normal-light patch, target_dr the low-light patch itself.
struct Batch {
  Tensor<float> input;      // N x 3 x (patch/2) x (patch/2)
  Tensor<float> target_le;  // N x 3 x patch x patch
  Tensor<float> target_dr;  // N x 3 x patch x patch
};

/// Loads the decoded pair for a sample; lets the trainer cache decodes.
using PairLoader =
    std::function<std::pair<Image, Image>(const PairedSample&)>;

/// Loads from disk and verifies that the pair has identical geometry.
std::pair<Image, Image> load_pair(const PairedSample& sample);

/// N draws: pick a sample uniformly, crop an aligned random patch x patch
/// window from both images (reflect-padding undersized inputs first), apply
/// a random augment code to both, then downsample the low patch by 2 for the
/// network input. All randomness comes from `rng` in a fixed order, so equal
/// seeds give bit-identical batches.
Batch sample_training_batch(const std::vector<PairedSample>& samples, int n,
                            Rng& rng, int patch = 256);
Batch sample_training_batch(const std::vector<PairedSample>& samples, int n,
                            Rng& rng, int patch, const PairLoader& loader);

/// Writes `count` synthetic pairs in generic layout: smooth random color
/// fields with geometric detail overlays as "high", and gamma-darkened,
/// gain-scaled, lightly noised versions as "low". A manifest JSON records
/// the seed and per-image parameters. Re-running with the same arguments
/// reproduces identical bytes.
void make_synthetic_dataset(const std::filesystem::path& out, int count,
                            std::uint64_t seed);

/// Decode cache with an LRU bound, usable as a PairLoader.
class PairCache {
 public:
  explicit PairCache(std::size_t capacity = 64) : capacity_(capacity) {}
  std::pair<Image, Image> operator()(const PairedSample& sample);

 private:
  struct Slot {
    std::string id;
    std::pair<Image, Image> images;
    std::uint64_t last_used = 0;
  };
  std::size_t capacity_;
  std::uint64_t tick_ = 0;
  std::vector<Slot> slots_;
};

}  // namespace neid
