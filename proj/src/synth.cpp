#include "binbrain/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "binbrain/errors.hpp"
#include "binbrain/util.hpp"

namespace binbrain {

namespace {

std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l));
}

Rgb jitter(Rgb base, Rng& rng, double amount) {
  return {clamp_u8(base.r + rng.symmetric(amount)), clamp_u8(base.g + rng.symmetric(amount)),
          clamp_u8(base.b + rng.symmetric(amount))};
}

void fill_ellipse_outline(Image& img, double cx, double cy, double rx, double ry, Rgb color,
                          double thickness) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double dx = (x - cx) / rx;
      double dy = (y - cy) / ry;
      double d = std::sqrt(dx * dx + dy * dy);
      if (std::abs(d - 1.0) * std::min(rx, ry) < thickness) img.at(x, y) = color;
    }
}

void fill_ellipse(Image& img, double cx, double cy, double rx, double ry, Rgb color) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double dx = (x - cx) / rx;
      double dy = (y - cy) / ry;
      if (dx * dx + dy * dy <= 1.0) img.at(x, y) = color;
    }
}

Image draw_glass(int size, Rng& rng) {
  Image img = make_image(size, size, jitter({95, 140, 175}, rng, 15));
  int rings = 2 + static_cast<int>(rng.index(3));
  for (int i = 0; i < rings; ++i) {
    double cx = rng.range(0.2, 0.8) * size;
    double cy = rng.range(0.2, 0.8) * size;
    double rx = rng.range(0.12, 0.3) * size;
    double ry = rng.range(0.12, 0.3) * size;
    fill_ellipse_outline(img, cx, cy, rx, ry, jitter({200, 230, 245}, rng, 12), rng.range(1.0, 2.2));
  }
  return img;
}

Image draw_metal(int size, Rng& rng) {
  Image img = make_image(size, size);
  Rgb base = jitter({128, 128, 134}, rng, 10);
  int y = 0;
  while (y < size) {
    int band = 2 + static_cast<int>(rng.index(5));
    double shade = rng.symmetric(45.0);
    for (int by = y; by < std::min(y + band, size); ++by)
      for (int x = 0; x < size; ++x)
        img.at(x, by) = {clamp_u8(base.r + shade), clamp_u8(base.g + shade), clamp_u8(base.b + shade)};
    y += band;
  }
  return img;
}

Image draw_paper(int size, Rng& rng) {
  Image img = make_image(size, size, jitter({228, 218, 188}, rng, 12));
  int gap = 5 + static_cast<int>(rng.index(6));
  int offset = static_cast<int>(rng.index(static_cast<std::size_t>(gap)));
  Rgb line = jitter({150, 140, 120}, rng, 10);
  for (int y = offset; y < size; y += gap)
    for (int x = 0; x < size; ++x) img.at(x, y) = line;
  for (int x = offset; x < size; x += gap * 2)
    for (int y = 0; y < size; ++y) img.at(x, y) = line;
  return img;
}

Image draw_plastic(int size, Rng& rng) {
  Image img = make_image(size, size, jitter({205, 75, 125}, rng, 15));
  int blobs = 3 + static_cast<int>(rng.index(4));
  for (int i = 0; i < blobs; ++i) {
    double cx = rng.range(0.1, 0.9) * size;
    double cy = rng.range(0.1, 0.9) * size;
    double rx = rng.range(0.08, 0.22) * size;
    double ry = rng.range(0.08, 0.22) * size;
    Rgb color = {clamp_u8(180 + rng.symmetric(60.0)), clamp_u8(60 + rng.symmetric(50.0)),
                 clamp_u8(90 + rng.symmetric(70.0))};
    fill_ellipse(img, cx, cy, rx, ry, color);
  }
  return img;
}

void add_noise(Image& img, Rng& rng, double amount) {
  for (Rgb& px : img.pixels)
    px = {clamp_u8(px.r + rng.symmetric(amount)), clamp_u8(px.g + rng.symmetric(amount)),
          clamp_u8(px.b + rng.symmetric(amount))};
}

}  // namespace

DatasetManifest generate_synthetic_dataset(const std::filesystem::path& out_dir,
                                           const SynthConfig& config) {
  if (config.per_class < 2) fail(Errc::invalid_config, "per_class must be >= 2");
  if (config.size < 8) fail(Errc::invalid_config, "image size must be >= 8");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    fail(Errc::unwritable_directory, out_dir.string());

  DatasetManifest manifest;
  manifest.root = out_dir;
  const auto& vocab = label_vocabulary();
  for (std::size_t label = 0; label < vocab.size(); ++label) {
    std::filesystem::create_directories(out_dir / vocab[label], ec);
    if (ec) fail(Errc::unwritable_directory, (out_dir / vocab[label]).string());
    for (int i = 0; i < config.per_class; ++i) {
      Rng rng(mix_seed(config.seed, label * 1000003ull + static_cast<std::uint64_t>(i)));
      Image img;
      switch (label) {
        case 0: img = draw_glass(config.size, rng); break;
        case 1: img = draw_metal(config.size, rng); break;
        case 2: img = draw_paper(config.size, rng); break;
        default: img = draw_plastic(config.size, rng); break;
      }
      add_noise(img, rng, 10.0);
      char name[32];
      std::snprintf(name, sizeof(name), "img%04d.ppm", i);
      std::string rel = vocab[label] + "/" + name;
      write_ppm(out_dir / rel, img);
      manifest.records.push_back({rel, label});
    }
  }
  write_manifest(out_dir / "manifest.csv", manifest);
  return manifest;
}

}  // namespace binbrain
