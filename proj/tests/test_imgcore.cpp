#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "neid/image.hpp"
#include "neid/png_io.hpp"
#include "neid/rng.hpp"
#include "oracles.hpp"

using namespace neid;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "neid_imgcore_tests";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// 2x2 16-bit RGB PNG and 2x2 paletted PNG, both structurally valid.
constexpr unsigned char kPng16Bit[] = {
    137, 80, 78, 71, 13,  10,  26,  10, 0,  0,  0,  13, 73, 72,  68, 82, 0,
    0,   0,  2,  0,  0,   0,   2,   16, 2,  0,  0,  0,  173, 68, 70, 48, 0,
    0,   0,  15, 73, 68,  65,  84,  120, 156, 99, 40, 53, 64, 64, 6,  100,
    14,  0,  102, 68, 7,  189, 156, 205, 77, 123, 0,  0,  0,  0,  73, 69,
    78,  68, 174, 66, 96, 130};

constexpr unsigned char kPngPalette[] = {
    137, 80,  78,  71,  13,  10, 26,  10,  0,   0,  0,   13,  73,  72,  68,
    82,  0,   0,   0,   2,   0,  0,   0,   2,   8,  3,   0,   0,   0,   69,
    104, 253, 22,  0,   0,   0,  6,   80,  76,  84, 69,  255, 0,   0,   0,
    255, 0,   210, 135, 239, 113, 0,  0,   0,   12, 73,  68,  65,  84,  120,
    156, 99,  96,  96,  4,   66, 0,   0,   12,  0,  3,   43,  99,  203, 80,
    0,   0,   0,   0,   73,  69, 78,  68,  174, 66, 96,  130};

void write_bytes(const fs::path& path, const unsigned char* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
}

}  // namespace

TEST_CASE("png load maps 8-bit values to [0,1]") {
  Image img = Image::zeros(2, 2);
  for (float& v : img.data) v = 1.0f;
  const fs::path p = temp_dir() / "white.png";
  save_png(img, p);
  Image back = load_png(p);
  REQUIRE(back.height == 2);
  REQUIRE(back.width == 2);
  for (float v : back.data) CHECK(v == 1.0f);

  Image gray = Image::zeros(1, 1);
  for (float& v : gray.data) v = 128.0f / 255.0f;
  const fs::path q = temp_dir() / "mid.png";
  save_png(gray, q);
  Image gback = load_png(q);
  CHECK(gback.data[0] == doctest::Approx(0.50196).epsilon(1e-4));
}

TEST_CASE("png quantization endpoints and round-half-up") {
  Image img = Image::zeros(1, 3);
  img.at(0, 0, 0) = 0.0f;
  img.at(0, 1, 0) = 1.0f;
  img.at(0, 2, 0) = 0.5f;  // 127.5 rounds up to 128
  const fs::path p = temp_dir() / "quant.png";
  save_png(img, p);
  Image back = load_png(p);
  CHECK(back.at(0, 0, 0) == 0.0f);
  CHECK(back.at(0, 1, 0) == 1.0f);
  CHECK(back.at(0, 2, 0) == 128.0f / 255.0f);
}

TEST_CASE("png roundtrip is byte-identical over random 8-bit images") {
  Rng rng(11);
  for (int iter = 0; iter < 5; ++iter) {
    const int h = 3 + static_cast<int>(rng.uniform_int(30));
    const int w = 3 + static_cast<int>(rng.uniform_int(30));
    Image img = Image::zeros(h, w);
    for (float& v : img.data) {
      v = static_cast<float>(rng.uniform_int(256)) / 255.0f;
    }
    const fs::path p = temp_dir() / "rt.png";
    save_png(img, p);
    Image back = load_png(p);
    REQUIRE(back.data.size() == img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
      REQUIRE(back.data[i] == img.data[i]);
    }
  }
}

TEST_CASE("png load(save(img)) stays within the quantization bound") {
  Rng rng(12);
  Image img = oracle::random_image(rng, 9, 7);
  const fs::path p = temp_dir() / "bound.png";
  save_png(img, p);
  Image back = load_png(p);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    CHECK(std::abs(back.data[i] - img.data[i]) <= 1.0f / 510.0f + 1e-7f);
  }
}

TEST_CASE("png io error paths") {
  CHECK_THROWS_AS(load_png(temp_dir() / "does_not_exist.png"), MissingFile);

  const fs::path not_png = temp_dir() / "not_png.png";
  std::ofstream(not_png) << "plain text";
  CHECK_THROWS_AS(load_png(not_png), UnsupportedFormat);

  const fs::path deep = temp_dir() / "deep.png";
  write_bytes(deep, kPng16Bit, sizeof(kPng16Bit));
  CHECK_THROWS_AS(load_png(deep), UnsupportedFormat);

  const fs::path pal = temp_dir() / "palette.png";
  write_bytes(pal, kPngPalette, sizeof(kPngPalette));
  CHECK_THROWS_AS(load_png(pal), UnsupportedFormat);

  Image img = Image::zeros(2, 2);
  CHECK_THROWS_AS(save_png(img, temp_dir() / "no_dir" / "x" / "y.png"), IoError);
}

TEST_CASE("rgb_to_hsv hits the standard anchors") {
  Image img = Image::zeros(1, 3);
  img.at(0, 0, 0) = 1.0f;  // red
  img.at(0, 1, 1) = 1.0f;  // green
  img.at(0, 2, 0) = img.at(0, 2, 1) = img.at(0, 2, 2) = 0.5f;  // gray
  HsvImage hsv = rgb_to_hsv(img);
  CHECK(hsv.at(0, 0, 0) == doctest::Approx(0.0));
  CHECK(hsv.at(0, 0, 1) == doctest::Approx(1.0));
  CHECK(hsv.at(0, 0, 2) == doctest::Approx(1.0));
  CHECK(hsv.at(0, 1, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(hsv.at(0, 1, 1) == doctest::Approx(1.0));
  CHECK(hsv.at(0, 2, 0) == 0.0f);  // achromatic hue convention
  CHECK(hsv.at(0, 2, 1) == 0.0f);
  CHECK(hsv.at(0, 2, 2) == 0.5f);
}

TEST_CASE("hsv_to_rgb inverts and handles zero saturation") {
  HsvImage hsv = HsvImage::zeros(1, 2);
  hsv.at(0, 0, 1) = 1.0f;  // (h=0, s=1, v=1) -> red
  hsv.at(0, 0, 2) = 1.0f;
  hsv.at(0, 1, 0) = 0.77f;  // any hue with s=0 -> gray v
  hsv.at(0, 1, 2) = 0.25f;
  Image rgb = hsv_to_rgb(hsv);
  CHECK(rgb.at(0, 0, 0) == doctest::Approx(1.0));
  CHECK(rgb.at(0, 0, 1) == doctest::Approx(0.0));
  CHECK(rgb.at(0, 0, 2) == doctest::Approx(0.0));
  for (int c = 0; c < 3; ++c) CHECK(rgb.at(0, 1, c) == doctest::Approx(0.25));
}

TEST_CASE("hsv roundtrip within 1e-6 off the degenerate set, V exact") {
  Rng rng(21);
  Image img = oracle::random_chromatic_image(rng, 16, 16, 0.01);
  HsvImage hsv = rgb_to_hsv(img);
  Image back = hsv_to_rgb(hsv);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    CHECK(std::abs(back.data[i] - img.data[i]) < 1e-6f);
  }
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const float mx = std::max({img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)});
      CHECK(hsv.at(y, x, 2) == mx);
    }
  }
}

TEST_CASE("bicubic identity when output size equals input size") {
  Rng rng(31);
  Image img = oracle::random_image(rng, 12, 9);
  Image out = bicubic_resize(img, 12, 9);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    CHECK(out.data[i] == img.data[i]);
  }
}

TEST_CASE("bicubic preserves constant images") {
  Image img = Image::zeros(10, 14);
  for (float& v : img.data) v = 0.37f;
  for (auto [h, w] : {std::pair{5, 7}, std::pair{20, 28}, std::pair{3, 31}}) {
    Image out = bicubic_resize(img, h, w);
    for (float v : out.data) CHECK(v == doctest::Approx(0.37f).epsilon(1e-9));
  }
}

TEST_CASE("bicubic downsample matches the direct-summation oracle") {
  // 8x8 horizontal ramp to 4x4, plus random images both directions.
  Image ramp = Image::zeros(8, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      for (int c = 0; c < 3; ++c) ramp.at(y, x, c) = static_cast<float>(x) / 7.0f;
    }
  }
  Image down = bicubic_resize(ramp, 4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double want =
            std::clamp(oracle::bicubic_direct_at(ramp, c, y, x, 4, 4), 0.0, 1.0);
        CHECK(down.at(y, x, c) == doctest::Approx(want).epsilon(1e-6));
      }
    }
  }

  Rng rng(32);
  Image img = oracle::random_image(rng, 13, 11);
  for (auto [h, w] : {std::pair{7, 5}, std::pair{26, 22}}) {
    Image out = bicubic_resize(img, h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) {
          const double want =
              std::clamp(oracle::bicubic_direct_at(img, c, y, x, h, w), 0.0, 1.0);
          CHECK(std::abs(out.at(y, x, c) - want) < 1e-6);
        }
      }
    }
  }
}

TEST_CASE("bicubic rejects degenerate output sizes") {
  Image img = Image::zeros(4, 4);
  CHECK_THROWS_AS(bicubic_resize(img, 0, 4), InvalidSize);
  CHECK_THROWS_AS(bicubic_resize(img, 4, -1), InvalidSize);
}

TEST_CASE("augment code 0 is the identity") {
  Rng rng(41);
  Image low = oracle::random_image(rng, 6, 8);
  Image high = oracle::random_image(rng, 6, 8);
  auto [l, h] = apply_augment(low, high, 0);
  CHECK(l.data == low.data);
  CHECK(h.data == high.data);
}

TEST_CASE("augment group structure") {
  Rng rng(42);
  Image low = oracle::random_image(rng, 8, 8);
  Image high = oracle::random_image(rng, 16, 16);  // 2x geometry supported

  // rot90 twice equals rot180
  auto once = apply_augment(low, high, 1);
  auto twice = apply_augment(once.first, once.second, 1);
  auto direct = apply_augment(low, high, 2);
  CHECK(twice.first.data == direct.first.data);
  CHECK(twice.second.data == direct.second.data);

  // vertical flip is an involution
  auto flip = apply_augment(low, high, 4);
  auto unflip = apply_augment(flip.first, flip.second, 4);
  CHECK(unflip.first.data == low.data);
  CHECK(unflip.second.data == high.data);

  // every code composed with its inverse is the identity
  for (int code = 0; code < 8; ++code) {
    auto fwd = apply_augment(low, high, code);
    auto back = apply_augment(fwd.first, fwd.second, augment_inverse(code));
    CHECK(back.first.data == low.data);
    CHECK(back.second.data == high.data);
  }
}

TEST_CASE("augment rejects bad codes and shapes") {
  Image low = Image::zeros(4, 4);
  Image high = Image::zeros(8, 8);
  CHECK_THROWS_AS(apply_augment(low, high, -1), InvalidCode);
  CHECK_THROWS_AS(apply_augment(low, high, 8), InvalidCode);
  Image odd = Image::zeros(5, 4);
  CHECK_THROWS_AS(apply_augment(low, odd, 0), ShapeMismatch);
}

TEST_CASE("pad_reflect introduces no new intensities and keeps the origin") {
  Rng rng(51);
  Image img = oracle::random_image(rng, 5, 4);
  Image padded = pad_reflect(img, 9, 9);
  REQUIRE(padded.height == 9);
  REQUIRE(padded.width == 9);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) CHECK(padded.at(y, x, c) == img.at(y, x, c));
    }
  }
  // mirrored row: row 5 reflects row 3 (no edge repeat)
  for (int x = 0; x < img.width; ++x) {
    CHECK(padded.at(5, x, 0) == img.at(3, x, 0));
  }
}
