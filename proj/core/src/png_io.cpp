#include "neid/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <vector>

namespace neid {

namespace {

// libpng error callbacks must not return; throwing unwinds through the C
// frames and the RAII holders below release the structs.
[[noreturn]] void throw_png_error(png_structp, png_const_charp msg) {
  throw UnsupportedFormat(std::string("libpng: ") + (msg ? msg : "error"));
}

void ignore_png_warning(png_structp, png_const_charp) {}

struct File {
  std::FILE* fp = nullptr;
  ~File() {
    if (fp) std::fclose(fp);
  }
};

struct Reader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~Reader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct Writer {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~Writer() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

}  // namespace

Image load_png(const std::filesystem::path& path) {
  File file;
  file.fp = std::fopen(path.string().c_str(), "rb");
  if (!file.fp) throw MissingFile("cannot open " + path.string());

  unsigned char signature[8];
  if (std::fread(signature, 1, 8, file.fp) != 8 ||
      png_sig_cmp(signature, 0, 8) != 0) {
    throw UnsupportedFormat(path.string() + " is not a PNG file");
  }

  Reader reader;
  reader.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                      throw_png_error, ignore_png_warning);
  if (!reader.png) throw IoError("png_create_read_struct failed");
  reader.info = png_create_info_struct(reader.png);
  if (!reader.info) throw IoError("png_create_info_struct failed");

  png_init_io(reader.png, file.fp);
  png_set_sig_bytes(reader.png, 8);
  png_read_info(reader.png, reader.info);

  const int bit_depth = png_get_bit_depth(reader.png, reader.info);
  const int color_type = png_get_color_type(reader.png, reader.info);
  if (bit_depth != 8) {
    throw UnsupportedFormat(path.string() + ": only 8-bit PNGs are supported");
  }
  switch (color_type) {
    case PNG_COLOR_TYPE_RGB:
      break;
    case PNG_COLOR_TYPE_RGB_ALPHA:
      png_set_strip_alpha(reader.png);
      break;
    case PNG_COLOR_TYPE_GRAY:
      png_set_gray_to_rgb(reader.png);
      break;
    case PNG_COLOR_TYPE_GRAY_ALPHA:
      png_set_strip_alpha(reader.png);
      png_set_gray_to_rgb(reader.png);
      break;
    default:
      throw UnsupportedFormat(path.string() + ": unsupported PNG color type");
  }
  png_set_interlace_handling(reader.png);
  png_read_update_info(reader.png, reader.info);

  const int height = static_cast<int>(png_get_image_height(reader.png, reader.info));
  const int width = static_cast<int>(png_get_image_width(reader.png, reader.info));
  if (png_get_rowbytes(reader.png, reader.info) !=
      static_cast<std::size_t>(width) * 3) {
    throw UnsupportedFormat(path.string() + ": unexpected row layout");
  }

  std::vector<unsigned char> bytes(static_cast<std::size_t>(height) * width * 3);
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    rows[y] = bytes.data() + static_cast<std::size_t>(y) * width * 3;
  }
  png_read_image(reader.png, rows.data());
  png_read_end(reader.png, nullptr);

  Image img = Image::zeros(height, width);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    img.data[i] = static_cast<float>(bytes[i]) / 255.0f;
  }
  return img;
}

namespace {

unsigned char quantize_byte(float v) {
  const double scaled = std::floor(static_cast<double>(v) * 255.0 + 0.5);
  return static_cast<unsigned char>(scaled < 0.0 ? 0.0
                                    : scaled > 255.0 ? 255.0
                                                     : scaled);
}

}  // namespace

void save_png(const Image& img, const std::filesystem::path& path) {
  if (img.height < 1 || img.width < 1 ||
      img.data.size() != static_cast<std::size_t>(img.height) * img.width * 3) {
    throw InvalidSize("save_png: malformed image");
  }

  File file;
  file.fp = std::fopen(path.string().c_str(), "wb");
  if (!file.fp) throw IoError("cannot open " + path.string() + " for writing");

  Writer writer;
  writer.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                       throw_png_error, ignore_png_warning);
  if (!writer.png) throw IoError("png_create_write_struct failed");
  writer.info = png_create_info_struct(writer.png);
  if (!writer.info) throw IoError("png_create_info_struct failed");

  png_init_io(writer.png, file.fp);
  png_set_IHDR(writer.png, writer.info, img.width, img.height, 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(writer.png, writer.info);

  std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) row[3 * x + c] = quantize_byte(img.at(y, x, c));
    }
    png_write_row(writer.png, row.data());
  }
  png_write_end(writer.png, writer.info);
  if (std::fflush(file.fp) != 0) throw IoError("flush failed for " + path.string());
}

Image quantize8(const Image& img) {
  Image out = img;
  for (float& v : out.data) {
    v = static_cast<float>(quantize_byte(v)) / 255.0f;
  }
  return out;
}

}  // namespace neid
