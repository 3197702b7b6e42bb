#include "neid/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "neid/parallel.hpp"
#include "neid/png_io.hpp"

namespace neid {

namespace {

std::vector<PairedSample> scan_split(const std::filesystem::path& low_dir,
                                     const std::filesystem::path& high_dir) {
  auto list_pngs = [](const std::filesystem::path& dir) {
    std::map<std::string, std::filesystem::path> files;
    if (!std::filesystem::is_directory(dir)) return files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      if (entry.path().extension() != ".png") continue;
      files.emplace(entry.path().stem().string(), entry.path());
    }
    return files;
  };

  const auto lows = list_pngs(low_dir);
  const auto highs = list_pngs(high_dir);
  for (const auto& [id, path] : lows) {
    if (!highs.count(id)) throw MissingPair(id + " has no high-light counterpart");
  }
  for (const auto& [id, path] : highs) {
    if (!lows.count(id)) throw MissingPair(id + " has no low-light counterpart");
  }

  std::vector<PairedSample> samples;
  samples.reserve(lows.size());
  for (const auto& [id, path] : lows) {
    samples.push_back({id, path, highs.at(id)});
  }
  // std::map iteration is already lexicographic; the sort documents intent.
  std::sort(samples.begin(), samples.end(),
            [](const PairedSample& a, const PairedSample& b) { return a.id < b.id; });
  return samples;
}

}  // namespace

PairedDataset scan_paired_dataset(const std::filesystem::path& root,
                                  DatasetLayout layout) {
  if (!std::filesystem::is_directory(root)) {
    throw MissingFile("dataset root does not exist: " + root.string());
  }
  PairedDataset ds;
  if (layout == DatasetLayout::generic) {
    ds.train = scan_split(root / "low", root / "high");
  } else {
    ds.train = scan_split(root / "our485" / "low", root / "our485" / "high");
    ds.eval = scan_split(root / "eval15" / "low", root / "eval15" / "high");
  }
  if (ds.train.empty() && ds.eval.empty()) {
    throw EmptyDataset("no image pairs under " + root.string());
  }
  return ds;
}

std::pair<Image, Image> load_pair(const PairedSample& sample) {
  Image low = load_png(sample.low_path);
  Image high = load_png(sample.high_path);
  if (!low.same_shape(high)) {
    throw ShapeMismatch("pair " + sample.id + " has mismatched geometry");
  }
  return {std::move(low), std::move(high)};
}

std::pair<Image, Image> PairCache::operator()(const PairedSample& sample) {
  ++tick_;
  for (auto& slot : slots_) {
    if (slot.id == sample.id) {
      slot.last_used = tick_;
      return slot.images;
    }
  }
  auto images = load_pair(sample);
  if (slots_.size() < capacity_) {
    slots_.push_back({sample.id, images, tick_});
  } else if (!slots_.empty()) {
    auto oldest = std::min_element(
        slots_.begin(), slots_.end(),
        [](const Slot& a, const Slot& b) { return a.last_used < b.last_used; });
    *oldest = {sample.id, images, tick_};
  }
  return images;
}

Batch sample_training_batch(const std::vector<PairedSample>& samples, int n,
                            Rng& rng, int patch) {
  return sample_training_batch(samples, n, rng, patch,
                               [](const PairedSample& s) { return load_pair(s); });
}

Batch sample_training_batch(const std::vector<PairedSample>& samples, int n,
                            Rng& rng, int patch, const PairLoader& loader) {
  if (samples.empty()) throw EmptyDataset("sample_training_batch: no samples");
  if (n < 1) throw InvalidSize("sample_training_batch: n must be >= 1");
  if (patch < 2 || patch % 2 != 0) {
    throw InvalidSize("sample_training_batch: patch must be even and >= 2");
  }

  struct Draw {
    std::pair<Image, Image> images;
    int off_y, off_x, code;
  };
  // All RNG consumption happens serially here so the draw sequence is a pure
  // function of the generator state; pixel assembly below is order-free.
  std::vector<Draw> draws;
  draws.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& sample = samples[rng.uniform_int(static_cast<std::int64_t>(samples.size()))];
    auto images = loader(sample);
    if (!images.first.same_shape(images.second)) {
      throw ShapeMismatch("pair " + sample.id + " has mismatched geometry");
    }
    if (images.first.height < patch || images.first.width < patch) {
      images.first = pad_reflect(images.first, patch, patch);
      images.second = pad_reflect(images.second, patch, patch);
    }
    const int off_y = static_cast<int>(rng.uniform_int(images.first.height - patch + 1));
    const int off_x = static_cast<int>(rng.uniform_int(images.first.width - patch + 1));
    const int code = static_cast<int>(rng.uniform_int(8));
    draws.push_back({std::move(images), off_y, off_x, code});
  }

  Batch batch;
  const int half = patch / 2;
  batch.input = Tensor<float>(n, 3, half, half);
  batch.target_le = Tensor<float>(n, 3, patch, patch);
  batch.target_dr = Tensor<float>(n, 3, patch, patch);

  parallel_for(0, n, [&](std::int64_t i) {
    const Draw& d = draws[i];
    Image low_patch = crop(d.images.first, d.off_y, d.off_x, patch, patch);
    Image high_patch = crop(d.images.second, d.off_y, d.off_x, patch, patch);
    auto [low_aug, high_aug] = apply_augment(low_patch, high_patch, d.code);
    set_sample(batch.target_le, static_cast<int>(i), high_aug);
    set_sample(batch.target_dr, static_cast<int>(i), low_aug);
    set_sample(batch.input, static_cast<int>(i), bicubic_resize(low_aug, half, half));
  });
  return batch;
}

namespace {

/// Smooth random color field plus rectangles, disks, and stripes.
Image synth_high_image(Rng& rng, int size) {
  Image img = Image::zeros(size, size);

  double base[3], amp[3][2], fx[3][2], fy[3][2], phase[3][2];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(0.35, 0.65);
    for (int k = 0; k < 2; ++k) {
      amp[c][k] = rng.uniform(0.05, 0.18);
      fx[c][k] = rng.uniform(0.5, 2.5);
      fy[c][k] = rng.uniform(0.5, 2.5);
      phase[c][k] = rng.uniform(0.0, 6.2831853);
    }
  }
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = static_cast<double>(x) / size;
      const double v = static_cast<double>(y) / size;
      for (int c = 0; c < 3; ++c) {
        double val = base[c];
        for (int k = 0; k < 2; ++k) {
          val += amp[c][k] *
                 std::sin(6.2831853 * (fx[c][k] * u + fy[c][k] * v) + phase[c][k]);
        }
        img.at(y, x, c) = static_cast<float>(std::clamp(val, 0.0, 1.0));
      }
    }
  }

  const int shapes = 4 + static_cast<int>(rng.uniform_int(4));
  for (int s = 0; s < shapes; ++s) {
    const int kind = static_cast<int>(rng.uniform_int(3));
    float color[3];
    for (float& c : color) c = static_cast<float>(rng.uniform(0.1, 0.95));
    if (kind == 0) {  // rectangle
      const int h = 8 + static_cast<int>(rng.uniform_int(size / 4));
      const int w = 8 + static_cast<int>(rng.uniform_int(size / 4));
      const int y0 = static_cast<int>(rng.uniform_int(size - h));
      const int x0 = static_cast<int>(rng.uniform_int(size - w));
      for (int y = y0; y < y0 + h; ++y) {
        for (int x = x0; x < x0 + w; ++x) {
          for (int c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
        }
      }
    } else if (kind == 1) {  // disk
      const int r = 6 + static_cast<int>(rng.uniform_int(size / 6));
      const int cy = static_cast<int>(rng.uniform_int(size));
      const int cx = static_cast<int>(rng.uniform_int(size));
      for (int y = std::max(0, cy - r); y < std::min(size, cy + r + 1); ++y) {
        for (int x = std::max(0, cx - r); x < std::min(size, cx + r + 1); ++x) {
          const int dy = y - cy;
          const int dx = x - cx;
          if (dy * dy + dx * dx <= r * r) {
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
          }
        }
      }
    } else {  // stripes
      const int period = 4 + static_cast<int>(rng.uniform_int(12));
      const int width = 1 + period / 3;
      const bool horizontal = rng.uniform_int(2) == 0;
      const int y0 = static_cast<int>(rng.uniform_int(size / 2));
      const int x0 = static_cast<int>(rng.uniform_int(size / 2));
      const int span = size / 3;
      for (int y = y0; y < std::min(size, y0 + span); ++y) {
        for (int x = x0; x < std::min(size, x0 + span); ++x) {
          const int t = horizontal ? y : x;
          if (t % period < width) {
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
          }
        }
      }
    }
  }
  return img;
}

}  // namespace

void make_synthetic_dataset(const std::filesystem::path& out, int count,
                            std::uint64_t seed) {
  if (count < 1) throw InvalidSize("make_synthetic_dataset: count must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out / "low", ec);
  std::filesystem::create_directories(out / "high", ec);
  if (!std::filesystem::is_directory(out / "low") ||
      !std::filesystem::is_directory(out / "high")) {
    throw IoError("cannot create dataset directories under " + out.string());
  }

  constexpr int kSize = 320;
  constexpr double kSigma = 0.01;
  Rng rng(seed);
  nlohmann::json manifest;
  manifest["seed"] = seed;
  manifest["images"] = nlohmann::json::array();

  for (int i = 0; i < count; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "img%03d", i);
    Image high = synth_high_image(rng, kSize);

    const double gamma = rng.uniform(2.0, 4.0);
    const double gain = rng.uniform(0.1, 0.3);
    Image low = Image::zeros(kSize, kSize);
    for (std::size_t j = 0; j < high.data.size(); ++j) {
      const double dark =
          gain * std::pow(static_cast<double>(high.data[j]), gamma) +
          kSigma * rng.normal();
      low.data[j] = static_cast<float>(std::clamp(dark, 0.0, 1.0));
    }

    save_png(high, out / "high" / (std::string(id) + ".png"));
    save_png(low, out / "low" / (std::string(id) + ".png"));
    manifest["images"].push_back(
        {{"id", id}, {"gamma", gamma}, {"gain", gain}, {"sigma", kSigma}});
  }

  std::ofstream mf(out / "manifest.json");
  if (!mf) throw IoError("cannot write manifest under " + out.string());
  mf << manifest.dump(2) << '\n';
}

}  // namespace neid
