#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "neid/errors.hpp"
#include "neid/image.hpp"

namespace neid {

/// Dense NCHW tensor. Training runs in float; gradient checks instantiate
/// the same code in double.
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<std::size_t>(n_) * c_ * h_ * w_, T(0)) {}

  static Tensor zeros(int n, int c, int h, int w) { return Tensor(n, c, h, w); }
  static Tensor zeros_like(const Tensor& o) { return Tensor(o.n, o.c, o.h, o.w); }

  std::int64_t size() const {
    return static_cast<std::int64_t>(n) * c * h * w;
  }
  bool empty() const { return data.empty(); }
  std::int64_t plane_size() const { return static_cast<std::int64_t>(h) * w; }

  T* plane(int ni, int ci) {
    return data.data() + (static_cast<std::size_t>(ni) * c + ci) * h * w;
  }
  const T* plane(int ni, int ci) const {
    return data.data() + (static_cast<std::size_t>(ni) * c + ci) * h * w;
  }

  T& at(int ni, int ci, int y, int x) {
    return data[((static_cast<std::size_t>(ni) * c + ci) * h + y) * w + x];
  }
  T at(int ni, int ci, int y, int x) const {
    return data[((static_cast<std::size_t>(ni) * c + ci) * h + y) * w + x];
  }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  void add_(const Tensor& o) {
    if (!same_shape(o)) throw ShapeMismatch("tensor add: shape mismatch");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
  }
};

/// Learnable parameters addressed by stable names. std::map keeps iteration
/// (and therefore checkpoint layout) deterministic.
template <typename T>
using ParamMap = std::map<std::string, Tensor<T>>;

/// Copies an interleaved RGB image into sample `ni` of an N x 3 x H x W tensor.
template <typename T>
void set_sample(Tensor<T>& t, int ni, const Image& img) {
  if (t.c != 3 || t.h != img.height || t.w != img.width) {
    throw ShapeMismatch("set_sample: geometry mismatch");
  }
  for (int c = 0; c < 3; ++c) {
    T* dst = t.plane(ni, c);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        dst[static_cast<std::size_t>(y) * img.width + x] = T(img.at(y, x, c));
      }
    }
  }
}

template <typename T>
Tensor<T> image_to_tensor(const Image& img) {
  Tensor<T> t(1, 3, img.height, img.width);
  set_sample(t, 0, img);
  return t;
}

/// Extracts sample `ni` back to an interleaved image. Values are clamped to
/// [0, 1] to honor the Image invariant.
template <typename T>
Image tensor_to_image(const Tensor<T>& t, int ni = 0) {
  Image img = Image::zeros(t.h, t.w);
  for (int c = 0; c < 3; ++c) {
    const T* src = t.plane(ni, c);
    for (int y = 0; y < t.h; ++y) {
      for (int x = 0; x < t.w; ++x) {
        const T v = src[static_cast<std::size_t>(y) * t.w + x];
        img.at(y, x, c) =
            static_cast<float>(v < T(0) ? T(0) : (v > T(1) ? T(1) : v));
      }
    }
  }
  return img;
}

}  // namespace neid
