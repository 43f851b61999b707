#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace truncgen {

struct ImageShape {
  int height = 0;
  int width = 0;
  int channels = 0;

  int size() const { return height * width * channels; }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

std::string to_string(const ImageShape& shape);

enum class Provenance { Baseline, Truncated, Mixed };

std::string to_string(Provenance p);

/// Dense H x W x C image with values in [0, 1], stored interleaved (HWC).
struct Image {
  ImageShape shape;
  Eigen::ArrayXd pixels;
  Provenance provenance = Provenance::Baseline;

  Image() = default;
  Image(ImageShape s, double fill = 0.0) : shape(s), pixels(Eigen::ArrayXd::Constant(s.size(), fill)) {}

  double& at(int y, int x, int c) { return pixels[(y * shape.width + x) * shape.channels + c]; }
  double at(int y, int x, int c) const { return pixels[(y * shape.width + x) * shape.channels + c]; }

  /// Clamps into [0, 1]; NaN becomes 0.
  void clamp();
  bool valid() const;
};

/// ITU-R BT.601 luma for multi-channel images; single channel is returned as is.
Eigen::ArrayXXd luminance(const Image& image);

/// Lossless 8-bit PNG (gray for 1 channel, RGB for 3). No ancillary chunks
/// are written, so encoded bytes carry pixels only.
std::vector<std::uint8_t> encode_png(const Image& image);
Image decode_png(const std::vector<std::uint8_t>& bytes);

void write_png(const Image& image, const std::string& path);
Image read_png(const std::string& path);

/// Images arranged on a grid with a 1-pixel separator; all cells share a shape.
Image tile_images(const std::vector<std::vector<Image>>& rows, double separator = 1.0);

}  // namespace truncgen
