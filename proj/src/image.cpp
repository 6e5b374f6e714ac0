#include "binbrain/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <string>

#include "binbrain/errors.hpp"
#include "binbrain/util.hpp"

namespace binbrain {

Image make_image(int width, int height, Rgb fill) {
  Image img;
  img.width = width;
  img.height = height;
  img.pixels.assign(static_cast<std::size_t>(width) * height, fill);
  return img;
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
bool next_token(const std::vector<unsigned char>& bytes, std::size_t& pos, std::string& token) {
  token.clear();
  while (pos < bytes.size()) {
    unsigned char ch = bytes[pos];
    if (ch == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(ch)) {
      ++pos;
    } else {
      break;
    }
  }
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') token.push_back(static_cast<char>(bytes[pos++]));
  return !token.empty();
}

int parse_dim(const std::string& token, const std::string& origin) {
  for (char ch : token)
    if (!std::isdigit(static_cast<unsigned char>(ch))) fail(Errc::corrupt_file, origin + ": bad header field '" + token + "'");
  long v = std::strtol(token.c_str(), nullptr, 10);
  if (v <= 0 || v > 1 << 20) fail(Errc::corrupt_file, origin + ": implausible dimension " + token);
  return static_cast<int>(v);
}

}  // namespace

Image decode_ppm(const std::vector<unsigned char>& bytes, const std::string& origin) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    if (bytes.size() >= 2 && bytes[0] == 'P')
      fail(Errc::unsupported_format, origin + ": only binary P6 is supported");
    fail(Errc::unsupported_format, origin + ": not a PPM file");
  }
  std::size_t pos = 2;
  std::string tok;
  if (!next_token(bytes, pos, tok)) fail(Errc::corrupt_file, origin + ": truncated header");
  int width = parse_dim(tok, origin);
  if (!next_token(bytes, pos, tok)) fail(Errc::corrupt_file, origin + ": truncated header");
  int height = parse_dim(tok, origin);
  if (!next_token(bytes, pos, tok)) fail(Errc::corrupt_file, origin + ": truncated header");
  if (tok != "255") fail(Errc::unsupported_format, origin + ": maxval " + tok + " not supported (expected 255)");
  // exactly one whitespace byte separates the header from the raster
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) fail(Errc::corrupt_file, origin + ": missing raster separator");
  ++pos;
  std::size_t need = static_cast<std::size_t>(width) * height * 3;
  if (bytes.size() - pos < need)
    fail(Errc::corrupt_file, origin + ": raster holds " + std::to_string((bytes.size() - pos) / 3) +
                                 " pixels, header declares " + std::to_string(static_cast<std::size_t>(width) * height));
  Image img = make_image(width, height);
  const unsigned char* src = bytes.data() + pos;
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = {src[3 * i], src[3 * i + 1], src[3 * i + 2]};
  return img;
}

Image decode_image(const std::filesystem::path& path) {
  return decode_ppm(read_file_bytes(path), path.string());
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::string header = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<unsigned char> bytes(header.begin(), header.end());
  bytes.reserve(bytes.size() + image.pixels.size() * 3);
  for (const Rgb& px : image.pixels) {
    bytes.push_back(px.r);
    bytes.push_back(px.g);
    bytes.push_back(px.b);
  }
  write_file_bytes(path, bytes.data(), bytes.size());
}

void write_pgm(const std::filesystem::path& path, const std::vector<std::uint8_t>& gray, int width, int height) {
  if (gray.size() != static_cast<std::size_t>(width) * height)
    fail(Errc::invalid_shape, "pgm payload does not match declared size");
  std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<unsigned char> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), gray.begin(), gray.end());
  write_file_bytes(path, bytes.data(), bytes.size());
}

Image crop(const Image& image, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || w < 1 || h < 1 || x0 + w > image.width || y0 + h > image.height)
    fail(Errc::invalid_shape, "crop rectangle outside image");
  Image out = make_image(w, h);
  for (int y = 0; y < h; ++y)
    std::memcpy(&out.at(0, y), &image.at(x0, y0 + y), static_cast<std::size_t>(w) * sizeof(Rgb));
  return out;
}

Image center_crop(const Image& image, int w, int h) {
  return crop(image, (image.width - w) / 2, (image.height - h) / 2, w, h);
}

Image flip_horizontal(const Image& image) {
  Image out = make_image(image.width, image.height);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) out.at(x, y) = image.at(image.width - 1 - x, y);
  return out;
}

Image pad_edge_replicate(const Image& image, int margin) {
  if (margin == 0) return image;
  Image out = make_image(image.width + 2 * margin, image.height + 2 * margin);
  for (int y = 0; y < out.height; ++y) {
    int sy = std::clamp(y - margin, 0, image.height - 1);
    for (int x = 0; x < out.width; ++x) {
      int sx = std::clamp(x - margin, 0, image.width - 1);
      out.at(x, y) = image.at(sx, sy);
    }
  }
  return out;
}

void bilinear_sample(const Image& image, double x, double y, double rgb_out[3]) {
  double cx = std::clamp(x, 0.0, static_cast<double>(image.width - 1));
  double cy = std::clamp(y, 0.0, static_cast<double>(image.height - 1));
  int x0 = static_cast<int>(std::floor(cx));
  int y0 = static_cast<int>(std::floor(cy));
  int x1 = std::min(x0 + 1, image.width - 1);
  int y1 = std::min(y0 + 1, image.height - 1);
  double wx = cx - x0;
  double wy = cy - y0;
  const Rgb& p00 = image.at(x0, y0);
  const Rgb& p10 = image.at(x1, y0);
  const Rgb& p01 = image.at(x0, y1);
  const Rgb& p11 = image.at(x1, y1);
  auto blend = [&](double a00, double a10, double a01, double a11) {
    return (1.0 - wx) * (1.0 - wy) * a00 + wx * (1.0 - wy) * a10 + (1.0 - wx) * wy * a01 + wx * wy * a11;
  };
  rgb_out[0] = blend(p00.r, p10.r, p01.r, p11.r);
  rgb_out[1] = blend(p00.g, p10.g, p01.g, p11.g);
  rgb_out[2] = blend(p00.b, p10.b, p01.b, p11.b);
}

Image bilinear_resize(const Image& image, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) fail(Errc::invalid_shape, "resize target must be positive");
  if (out_w == image.width && out_h == image.height) return image;
  Image out = make_image(out_w, out_h);
  const double sx = static_cast<double>(image.width) / out_w;
  const double sy = static_cast<double>(image.height) / out_h;
  auto round_u8 = [](double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l)); };
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      double rgb[3];
      bilinear_sample(image, fx, fy, rgb);
      out.at(x, y) = {round_u8(rgb[0]), round_u8(rgb[1]), round_u8(rgb[2])};
    }
  }
  return out;
}

Image square_resize(const Image& image, int target) {
  if (target < 1) fail(Errc::invalid_shape, "resize target must be positive");
  int side = std::min(image.width, image.height);
  Image squared = (side == image.width && side == image.height) ? image : center_crop(image, side, side);
  return bilinear_resize(squared, target, target);
}

}  // namespace binbrain
