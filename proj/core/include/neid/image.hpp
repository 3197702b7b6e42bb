#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "neid/errors.hpp"

namespace neid {

/// H x W x 3 picture, interleaved RGB, row-major, values in [0, 1].
/// Real-valued everywhere inside the library; 8-bit only at the PNG boundary.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> data;  // height * width * 3

  static Image zeros(int h, int w) {
    Image img;
    img.height = h;
    img.width = w;
    img.data.assign(static_cast<std::size_t>(h) * w * 3, 0.0f);
    return img;
  }

  float& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width;
  }
};

/// Same geometry as Image; channels are H, S, V, each in [0, 1]
/// (H is the hue angle divided by 360 degrees).
struct HsvImage {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  static HsvImage zeros(int h, int w) {
    HsvImage img;
    img.height = h;
    img.width = w;
    img.data.assign(static_cast<std::size_t>(h) * w * 3, 0.0f);
    return img;
  }

  float& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

/// Hexcone RGB -> HSV for one pixel. H is scaled to [0, 1); achromatic
/// pixels get H = 0. S = (max - min) / max for max > 0, else 0. V = max.
/// Shared by the image conversion and the differentiable color-loss path.
template <typename T>
inline void rgb_to_hsv_pixel(T r, T g, T b, T& h, T& s, T& v) {
  const T mx = std::max(r, std::max(g, b));
  const T mn = std::min(r, std::min(g, b));
  const T delta = mx - mn;
  v = mx;
  s = (mx > T(0)) ? delta / mx : T(0);
  if (delta <= T(0)) {
    h = T(0);
    return;
  }
  T h6;
  if (mx == r) {
    h6 = (g - b) / delta;
    if (h6 < T(0)) h6 += T(6);
  } else if (mx == g) {
    h6 = (b - r) / delta + T(2);
  } else {
    h6 = (r - g) / delta + T(4);
  }
  h = h6 / T(6);
  if (h >= T(1)) h -= T(1);
}

/// Inverse hexcone conversion.
template <typename T>
inline void hsv_to_rgb_pixel(T h, T s, T v, T& r, T& g, T& b) {
  if (s <= T(0)) {
    r = g = b = v;
    return;
  }
  T h6 = h * T(6);
  if (h6 >= T(6)) h6 -= T(6);
  const int sector = static_cast<int>(h6) % 6;
  const T f = h6 - static_cast<T>(static_cast<int>(h6));
  const T p = v * (T(1) - s);
  const T q = v * (T(1) - s * f);
  const T t = v * (T(1) - s * (T(1) - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

/// Keys cubic-convolution kernel with a = -0.5 (Catmull-Rom). Partition of
/// unity: the four taps around any sample point sum to 1.
template <typename T>
inline T cubic_keys(T x) {
  constexpr double a = -0.5;
  const T ax = std::abs(x);
  if (ax < T(1)) {
    return ((T(a + 2) * ax - T(a + 3)) * ax) * ax + T(1);
  }
  if (ax < T(2)) {
    return ((T(a) * ax - T(5 * a)) * ax + T(8 * a)) * ax - T(4 * a);
  }
  return T(0);
}

/// Source taps for one output coordinate under half-pixel alignment:
/// src = (dst + 0.5) * scale - 0.5. Tap positions are clamped to
/// [0, in_size - 1]; weights come from the Keys kernel.
inline void bicubic_taps(int dst, double scale, int in_size, int pos[4],
                         double wgt[4]) {
  const double src = (dst + 0.5) * scale - 0.5;
  const int base = static_cast<int>(std::floor(src));
  const double frac = src - base;
  for (int j = 0; j < 4; ++j) {
    const int p = base - 1 + j;
    pos[j] = p < 0 ? 0 : (p >= in_size ? in_size - 1 : p);
    wgt[j] = cubic_keys(frac - (j - 1.0));
  }
}

HsvImage rgb_to_hsv(const Image& img);
Image hsv_to_rgb(const HsvImage& img);

/// Separable cubic-convolution resampling (Keys kernel, a = -0.5), half-pixel
/// center alignment, edge clamp, output clamped to [0, 1].
Image bicubic_resize(const Image& img, int out_h, int out_w);

/// Reflect-pads (mirror without repeating the border sample) at the bottom
/// and right so the result is at least out_h x out_w.
Image pad_reflect(const Image& img, int out_h, int out_w);

Image crop(const Image& img, int y0, int x0, int h, int w);

/// Codes 0-7: (code & 3) quarter-turn CCW rotations, then a vertical flip
/// when (code >> 2) is set. The same transform is applied to both images;
/// their geometries must be equal or high = 2x low.
std::pair<Image, Image> apply_augment(const Image& low, const Image& high,
                                      int code);

/// The augment code whose transform undoes `code`.
int augment_inverse(int code);

}  // namespace neid
