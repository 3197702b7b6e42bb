#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "neid/image.hpp"

namespace neid {

/// Peak signal-to-noise ratio in dB: 10 * log10(1 / MSE) with images in
/// [0, 1], MSE taken jointly over all RGB samples. Returns +infinity when
/// the images are identical.
double psnr(const Image& pred, const Image& gt);

/// Mean SSIM over 11x11 Gaussian windows (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// dynamic range 1. Valid windows only (no border padding); computed per
/// channel and averaged. Requires min(H, W) >= 11.
double ssim(const Image& pred, const Image& gt);

struct MetricsReport {
  struct Entry {
    std::string id;
    double psnr = 0.0;
    double ssim = 0.0;
  };
  std::vector<Entry> per_image;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;

  /// Recomputes the aggregate means from per_image.
  void compute_means();

  /// {"per_image":[{"id","psnr","ssim"}],"mean_psnr","mean_ssim"};
  /// +infinity is serialized as the string "inf".
  std::string to_json() const;
  static MetricsReport from_json(const std::string& text);

  void write_json(const std::filesystem::path& path) const;
  static MetricsReport read_json(const std::filesystem::path& path);
  void write_csv(const std::filesystem::path& path) const;
};

}  // namespace neid
