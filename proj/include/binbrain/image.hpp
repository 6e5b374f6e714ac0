#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace binbrain {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

// 8-bit RGB raster, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;

  const Rgb& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  Rgb& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const Image&) const = default;
};

Image make_image(int width, int height, Rgb fill = {});

// Binary PPM (P6, maxval 255). Other formats are rejected, not guessed.
Image decode_image(const std::filesystem::path& path);
Image decode_ppm(const std::vector<unsigned char>& bytes, const std::string& origin);
void write_ppm(const std::filesystem::path& path, const Image& image);

// Binary PGM (P5, maxval 255) for grayscale exports.
void write_pgm(const std::filesystem::path& path, const std::vector<std::uint8_t>& gray, int width, int height);

// Center-crop to the largest centered square, then bilinear resample
// (half-pixel centers) to target x target.
Image square_resize(const Image& image, int target);

// Bilinear resample to an arbitrary size, half-pixel center convention.
Image bilinear_resize(const Image& image, int out_w, int out_h);

// Continuous-coordinate bilinear sample (edge clamped); the value every
// resized pixel is rounded from.
void bilinear_sample(const Image& image, double x, double y, double rgb_out[3]);

Image flip_horizontal(const Image& image);
Image crop(const Image& image, int x0, int y0, int w, int h);
// Grow by `margin` on every side, replicating edge pixels.
Image pad_edge_replicate(const Image& image, int margin);
Image center_crop(const Image& image, int w, int h);

}  // namespace binbrain
