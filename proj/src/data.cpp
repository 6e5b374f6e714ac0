#include "binbrain/data.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "binbrain/errors.hpp"
#include "binbrain/util.hpp"

namespace binbrain {

std::size_t label_index(const std::string& label) {
  const auto& vocab = label_vocabulary();
  for (std::size_t i = 0; i < vocab.size(); ++i)
    if (vocab[i] == label) return i;
  fail(Errc::unknown_label, "'" + label + "' is not one of glass/metal/paper/plastic");
}

std::array<std::size_t, 4> DatasetManifest::label_counts() const {
  std::array<std::size_t, 4> counts = {0, 0, 0, 0};
  for (const auto& rec : records) counts[rec.label]++;
  return counts;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::string text = read_file_text(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(Errc::malformed_row, path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "path,label")
    fail(Errc::malformed_row, path.string() + ":1: expected header 'path,label', got '" + line + "'");

  DatasetManifest manifest;
  manifest.root = path.parent_path();
  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      fail(Errc::malformed_row, path.string() + ":" + std::to_string(line_no) + ": expected 'path,label'");
    std::string rec_path = line.substr(0, comma);
    std::string label = line.substr(comma + 1);
    if (rec_path.empty())
      fail(Errc::malformed_row, path.string() + ":" + std::to_string(line_no) + ": empty path");
    if (!seen.insert(rec_path).second)
      fail(Errc::duplicate_path, path.string() + ":" + std::to_string(line_no) + ": '" + rec_path + "' listed twice");
    manifest.records.push_back({rec_path, label_index(label)});
  }
  if (manifest.records.empty()) fail(Errc::empty_manifest, path.string() + ": no records after header");
  return manifest;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  // Record paths resolve against the manifest's own directory, so they are
  // rewritten when the manifest lands somewhere other than its image root.
  std::filesystem::path base = path.parent_path();
  std::string out = "path,label\n";
  for (const auto& rec : manifest.records) {
    std::filesystem::path rel = rec.path;
    if (!manifest.root.empty() && !std::filesystem::equivalent(base.empty() ? "." : base, manifest.root))
      rel = std::filesystem::relative(manifest.root / rec.path, base.empty() ? "." : base);
    out += rel.generic_string() + "," + label_vocabulary()[rec.label] + "\n";
  }
  write_file_text(path, out);
}

ChannelStats compute_channel_stats(const DatasetManifest& manifest, int preprocessed_size) {
  if (manifest.records.empty()) fail(Errc::empty_manifest, "cannot compute statistics of an empty manifest");
  // Two-pass: exact mean first, then centered second moment.
  std::array<double, 3> sum = {0, 0, 0};
  std::size_t count = 0;
  auto for_each_image = [&](auto&& fn) {
    for (const auto& rec : manifest.records) {
      Image img;
      try {
        img = decode_image(manifest.root / rec.path);
      } catch (const Error& e) {
        fail(e.code(), rec.path + ": " + e.what());
      }
      fn(square_resize(img, preprocessed_size));
    }
  };
  for_each_image([&](const Image& img) {
    for (const Rgb& px : img.pixels) {
      sum[0] += px.r / 255.0;
      sum[1] += px.g / 255.0;
      sum[2] += px.b / 255.0;
    }
    count += img.pixels.size();
  });
  ChannelStats stats;
  for (int c = 0; c < 3; ++c) stats.mean[c] = sum[c] / static_cast<double>(count);
  std::array<double, 3> sq = {0, 0, 0};
  for_each_image([&](const Image& img) {
    for (const Rgb& px : img.pixels) {
      double d0 = px.r / 255.0 - stats.mean[0];
      double d1 = px.g / 255.0 - stats.mean[1];
      double d2 = px.b / 255.0 - stats.mean[2];
      sq[0] += d0 * d0;
      sq[1] += d1 * d1;
      sq[2] += d2 * d2;
    }
  });
  for (int c = 0; c < 3; ++c)
    stats.std_dev[c] = std::max(std::sqrt(sq[c] / static_cast<double>(count)), 1e-6);
  return stats;
}

void write_stats_csv(const std::filesystem::path& path, const ChannelStats& stats) {
  static const char* names[3] = {"red", "green", "blue"};
  std::string out = "channel,mean,std\n";
  for (int c = 0; c < 3; ++c)
    out += std::string(names[c]) + "," + fmt_g17(stats.mean[c]) + "," + fmt_g17(stats.std_dev[c]) + "\n";
  write_file_text(path, out);
}

ChannelStats read_stats_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file_text(path));
  std::string line;
  if (!std::getline(in, line) || line != "channel,mean,std")
    fail(Errc::malformed_row, path.string() + ": expected header 'channel,mean,std'");
  ChannelStats stats;
  static const char* names[3] = {"red", "green", "blue"};
  for (int c = 0; c < 3; ++c) {
    if (!std::getline(in, line)) fail(Errc::malformed_row, path.string() + ": missing channel row");
    std::istringstream row(line);
    std::string name, mean, sd;
    if (!std::getline(row, name, ',') || !std::getline(row, mean, ',') || !std::getline(row, sd))
      fail(Errc::malformed_row, path.string() + ": bad row '" + line + "'");
    if (name != names[c]) fail(Errc::malformed_row, path.string() + ": expected channel '" + names[c] + "'");
    stats.mean[c] = std::stod(mean);
    stats.std_dev[c] = std::stod(sd);
    if (stats.std_dev[c] <= 0.0) fail(Errc::malformed_row, path.string() + ": std must be positive");
  }
  return stats;
}

Tensor normalize_image(const Image& image, const ChannelStats& stats, int expected_size) {
  if (image.width != image.height)
    fail(Errc::not_square, std::to_string(image.width) + "x" + std::to_string(image.height));
  if (expected_size > 0 && image.width != expected_size)
    fail(Errc::size_mismatch, "image is " + std::to_string(image.width) + ", model expects " +
                                  std::to_string(expected_size));
  const std::size_t s = static_cast<std::size_t>(image.width);
  Tensor out = Tensor::zeros({3, s, s});
  double* v = out.values_mut().data();
  const std::size_t plane = s * s;
  for (std::size_t i = 0; i < plane; ++i) {
    const Rgb& px = image.pixels[i];
    v[i] = (px.r / 255.0 - stats.mean[0]) / stats.std_dev[0];
    v[plane + i] = (px.g / 255.0 - stats.mean[1]) / stats.std_dev[1];
    v[2 * plane + i] = (px.b / 255.0 - stats.mean[2]) / stats.std_dev[2];
  }
  return out;
}

std::vector<double> denormalize(const Tensor& normalized, const ChannelStats& stats) {
  if (normalized.rank() != 3 || normalized.dim(0) != 3)
    fail(Errc::shape_mismatch, "expected [3,S,S], got " + shape_str(normalized.shape()));
  const std::size_t plane = normalized.dim(1) * normalized.dim(2);
  std::vector<double> out(normalized.numel());
  std::span<const double> v = normalized.values();
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i)
      out[c * plane + i] = v[c * plane + i] * stats.std_dev[c] + stats.mean[c];
  return out;
}

void AugmentPolicy::validate() const {
  if (horizontal_flip_prob < 0.0 || horizontal_flip_prob > 1.0)
    fail(Errc::invalid_config, "flip probability must be in [0,1]");
  if (crop_padding < 0) fail(Errc::invalid_config, "crop padding must be >= 0");
  if (!(zoom_lo > 0.0 && zoom_lo <= 1.0 && zoom_hi >= 1.0))
    fail(Errc::invalid_config, "zoom range must satisfy 0 < lo <= 1 <= hi");
}

Image augment(const Image& image, const AugmentPolicy& policy, std::uint64_t sample_index) {
  policy.validate();
  if (image.width != image.height) fail(Errc::not_square, "augment expects a square image");
  Rng rng(mix_seed(policy.seed, sample_index));

  // The draw order is fixed (zoom factor, crop x, crop y, flip) and every
  // draw happens even for degenerate settings, so the stream stays aligned
  // across policies.
  const int s = image.width;
  double u = rng.range(policy.zoom_lo, policy.zoom_hi);
  int ox = static_cast<int>(rng.index(static_cast<std::size_t>(2 * policy.crop_padding + 1)));
  int oy = static_cast<int>(rng.index(static_cast<std::size_t>(2 * policy.crop_padding + 1)));
  bool flip = rng.unit() < policy.horizontal_flip_prob;

  Image work = image;
  int zoomed = std::max(1, static_cast<int>(std::lround(s * u)));
  if (zoomed != s) {
    work = bilinear_resize(work, zoomed, zoomed);
    work = zoomed > s ? center_crop(work, s, s) : pad_edge_replicate(work, (s - zoomed + 1) / 2);
    if (work.width != s) work = center_crop(work, s, s);
  }
  if (policy.crop_padding > 0) {
    work = pad_edge_replicate(work, policy.crop_padding);
    work = crop(work, ox, oy, s, s);
  }
  if (flip) work = flip_horizontal(work);
  return work;
}

std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                          double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    fail(Errc::invalid_config, "train fraction must be in (0,1)");
  DatasetManifest train, val;
  train.root = manifest.root;
  val.root = manifest.root;
  for (std::size_t label = 0; label < label_vocabulary().size(); ++label) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < manifest.records.size(); ++i)
      if (manifest.records[i].label == label) members.push_back(i);
    if (members.empty()) continue;
    std::size_t n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(members.size())));
    if (n_train == 0)
      fail(Errc::label_too_small, "label '" + label_vocabulary()[label] + "' has too few records (" +
                                      std::to_string(members.size()) + ") to keep any in training");
    auto perm = seeded_permutation(members.size(), mix_seed(seed, label));
    for (std::size_t i = 0; i < members.size(); ++i) {
      const auto& rec = manifest.records[members[perm[i]]];
      (i < n_train ? train : val).records.push_back(rec);
    }
  }
  return {std::move(train), std::move(val)};
}

LoadedDataset load_dataset(const DatasetManifest& manifest, int input_size) {
  LoadedDataset ds;
  ds.images.reserve(manifest.records.size());
  for (const auto& rec : manifest.records) {
    Image img;
    try {
      img = decode_image(manifest.root / rec.path);
    } catch (const Error& e) {
      fail(e.code(), rec.path + ": " + e.what());
    }
    ds.images.push_back(square_resize(img, input_size));
    ds.labels.push_back(rec.label);
    ds.paths.push_back(rec.path);
  }
  return ds;
}

}  // namespace binbrain
