#include "neid/image.hpp"

#include <algorithm>
#include <string>

namespace neid {

HsvImage rgb_to_hsv(const Image& img) {
  HsvImage out = HsvImage::zeros(img.height, img.width);
  const std::size_t n = static_cast<std::size_t>(img.height) * img.width;
  for (std::size_t i = 0; i < n; ++i) {
    double h, s, v;
    rgb_to_hsv_pixel<double>(img.data[3 * i], img.data[3 * i + 1],
                             img.data[3 * i + 2], h, s, v);
    out.data[3 * i] = static_cast<float>(h);
    out.data[3 * i + 1] = static_cast<float>(s);
    out.data[3 * i + 2] = static_cast<float>(v);
  }
  return out;
}

Image hsv_to_rgb(const HsvImage& img) {
  Image out = Image::zeros(img.height, img.width);
  const std::size_t n = static_cast<std::size_t>(img.height) * img.width;
  for (std::size_t i = 0; i < n; ++i) {
    double r, g, b;
    hsv_to_rgb_pixel<double>(img.data[3 * i], img.data[3 * i + 1],
                             img.data[3 * i + 2], r, g, b);
    out.data[3 * i] = static_cast<float>(r);
    out.data[3 * i + 1] = static_cast<float>(g);
    out.data[3 * i + 2] = static_cast<float>(b);
  }
  return out;
}

Image bicubic_resize(const Image& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw InvalidSize("bicubic_resize: output size must be at least 1x1");
  }
  const double scale_y = static_cast<double>(img.height) / out_h;
  const double scale_x = static_cast<double>(img.width) / out_w;

  // Horizontal pass (double precision throughout), then vertical.
  std::vector<double> mid(static_cast<std::size_t>(img.height) * out_w * 3);
  for (int x = 0; x < out_w; ++x) {
    int pos[4];
    double wgt[4];
    bicubic_taps(x, scale_x, img.width, pos, wgt);
    for (int y = 0; y < img.height; ++y) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int j = 0; j < 4; ++j) acc += wgt[j] * img.at(y, pos[j], c);
        mid[(static_cast<std::size_t>(y) * out_w + x) * 3 + c] = acc;
      }
    }
  }

  Image out = Image::zeros(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    int pos[4];
    double wgt[4];
    bicubic_taps(y, scale_y, img.height, pos, wgt);
    for (int x = 0; x < out_w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int j = 0; j < 4; ++j) {
          acc += wgt[j] * mid[(static_cast<std::size_t>(pos[j]) * out_w + x) * 3 + c];
        }
        out.at(y, x, c) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
      }
    }
  }
  return out;
}

namespace {

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

Image rotate90_ccw(const Image& img) {
  Image out = Image::zeros(img.width, img.height);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        out.at(y, x, c) = img.at(x, img.width - 1 - y, c);
      }
    }
  }
  return out;
}

Image flip_vertical(const Image& img) {
  Image out = Image::zeros(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        out.at(y, x, c) = img.at(img.height - 1 - y, x, c);
      }
    }
  }
  return out;
}

Image transform_one(const Image& img, int code) {
  Image out = img;
  const int quarter_turns = code & 3;
  for (int k = 0; k < quarter_turns; ++k) out = rotate90_ccw(out);
  if (code & 4) out = flip_vertical(out);
  return out;
}

}  // namespace

Image pad_reflect(const Image& img, int out_h, int out_w) {
  const int h = std::max(img.height, out_h);
  const int w = std::max(img.width, out_w);
  if (h == img.height && w == img.width) return img;
  Image out = Image::zeros(h, w);
  for (int y = 0; y < h; ++y) {
    const int sy = reflect_index(y, img.height);
    for (int x = 0; x < w; ++x) {
      const int sx = reflect_index(x, img.width);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

Image crop(const Image& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || y0 + h > img.height || x0 + w > img.width) {
    throw InvalidSize("crop: window outside image bounds");
  }
  Image out = Image::zeros(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    }
  }
  return out;
}

std::pair<Image, Image> apply_augment(const Image& low, const Image& high,
                                      int code) {
  if (code < 0 || code > 7) {
    throw InvalidCode("augment code must be in [0, 7], got " +
                      std::to_string(code));
  }
  const bool equal = high.height == low.height && high.width == low.width;
  const bool doubled = high.height == 2 * low.height && high.width == 2 * low.width;
  if (!equal && !doubled) {
    throw ShapeMismatch("apply_augment: high image must match low or be 2x");
  }
  return {transform_one(low, code), transform_one(high, code)};
}

int augment_inverse(int code) {
  if (code < 0 || code > 7) {
    throw InvalidCode("augment code must be in [0, 7]");
  }
  // rot(r) then flip(f); inverse is flip(f) then rot(-r), and
  // flip o rot(r) == rot(-r) o flip.
  const int r = code & 3;
  const int f = code >> 2;
  const int inv_r = f ? r : (4 - r) & 3;
  return inv_r | (f << 2);
}

}  // namespace neid
