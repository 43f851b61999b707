#include "truncgen/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "truncgen/errors.hpp"

namespace truncgen {

std::string to_string(const ImageShape& shape) {
  return std::to_string(shape.height) + "x" + std::to_string(shape.width) + "x" + std::to_string(shape.channels);
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Baseline: return "baseline";
    case Provenance::Truncated: return "truncated";
    case Provenance::Mixed: return "mixed";
  }
  return "baseline";
}

void Image::clamp() {
  pixels = pixels.isNaN().select(0.0, pixels).max(0.0).min(1.0);
}

bool Image::valid() const {
  return pixels.size() == shape.size() && pixels.allFinite() && (pixels >= 0.0).all() && (pixels <= 1.0).all();
}

Eigen::ArrayXXd luminance(const Image& image) {
  const auto& s = image.shape;
  Eigen::ArrayXXd out(s.height, s.width);
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      if (s.channels >= 3) {
        out(y, x) = 0.299 * image.at(y, x, 0) + 0.587 * image.at(y, x, 1) + 0.114 * image.at(y, x, 2);
      } else {
        out(y, x) = image.at(y, x, 0);
      }
    }
  }
  return out;
}

namespace {

struct PngWriteBuffer {
  std::vector<std::uint8_t>* bytes;
};

void png_write_callback(png_structp png, png_bytep data, png_size_t length) {
  auto* buf = static_cast<PngWriteBuffer*>(png_get_io_ptr(png));
  buf->bytes->insert(buf->bytes->end(), data, data + length);
}

void png_flush_callback(png_structp) {}

struct PngReadBuffer {
  const std::vector<std::uint8_t>* bytes;
  std::size_t offset = 0;
};

void png_read_callback(png_structp png, png_bytep out, png_size_t length) {
  auto* buf = static_cast<PngReadBuffer*>(png_get_io_ptr(png));
  if (buf->offset + length > buf->bytes->size()) png_error(png, "truncated PNG stream");
  std::memcpy(out, buf->bytes->data() + buf->offset, length);
  buf->offset += length;
}

void png_warning_callback(png_structp, png_const_charp) {}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& image) {
  const auto& s = image.shape;
  if (s.channels != 1 && s.channels != 3) throw InvalidArgument("encode_png: only 1 or 3 channels supported");
  if (image.pixels.size() != s.size()) throw InvalidArgument("encode_png: pixel count does not match shape");

  std::vector<std::uint8_t> bytes;
  std::vector<std::uint8_t> row(static_cast<std::size_t>(s.width) * s.channels);
  PngWriteBuffer buffer{&bytes};
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warning_callback);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw InvalidArgument("encode_png: libpng error");
  }
  png_set_write_fn(png, &buffer, png_write_callback, png_flush_callback);
  png_set_IHDR(png, info, s.width, s.height, 8, s.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x)
      for (int c = 0; c < s.channels; ++c) row[x * s.channels + c] = quantize(image.at(y, x, c));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return bytes;
}

Image decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw InvalidArgument("decode_png: not a PNG stream");
  PngReadBuffer buffer{&bytes, 0};
  Image image;
  std::vector<std::uint8_t> row;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warning_callback);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InvalidArgument("decode_png: corrupt PNG stream");
  }
  png_set_read_fn(png, &buffer, png_read_callback);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InvalidArgument("decode_png: unsupported channel count");
  }
  image = Image(ImageShape{height, width, channels});
  row.resize(png_get_rowbytes(png, info));
  for (int y = 0; y < height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c) image.at(y, x, c) = row[x * channels + c] / 255.0;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void write_png(const Image& image, const std::string& path) {
  const auto bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Image read_png(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_png(bytes);
}

Image tile_images(const std::vector<std::vector<Image>>& rows, double separator) {
  if (rows.empty() || rows.front().empty()) throw InvalidArgument("tile_images: empty grid");
  const ImageShape cell = rows.front().front().shape;
  std::size_t cols = 0;
  for (const auto& row : rows) cols = std::max(cols, row.size());
  ImageShape out_shape{static_cast<int>(rows.size()) * (cell.height + 1) - 1,
                       static_cast<int>(cols) * (cell.width + 1) - 1, cell.channels};
  Image out(out_shape, separator);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const Image& img = rows[r][c];
      if (!(img.shape == cell)) throw InvalidArgument("tile_images: cell shapes differ");
      const int oy = static_cast<int>(r) * (cell.height + 1);
      const int ox = static_cast<int>(c) * (cell.width + 1);
      for (int y = 0; y < cell.height; ++y)
        for (int x = 0; x < cell.width; ++x)
          for (int ch = 0; ch < cell.channels; ++ch) out.at(oy + y, ox + x, ch) = img.at(y, x, ch);
    }
  }
  return out;
}

}  // namespace truncgen
