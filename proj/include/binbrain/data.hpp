#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "binbrain/image.hpp"
#include "binbrain/tensor.hpp"

namespace binbrain {

// Fixed label vocabulary; class indices follow this order.
inline const std::vector<std::string>& label_vocabulary() {
  static const std::vector<std::string> labels = {"glass", "metal", "paper", "plastic"};
  return labels;
}
std::size_t label_index(const std::string& label);

struct ManifestRecord {
  std::string path;  // relative to root
  std::size_t label = 0;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestRecord> records;

  std::array<std::size_t, 4> label_counts() const;
  std::size_t size() const { return records.size(); }
};

// CSV with header "path,label", UTF-8, LF endings.
DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// Per-channel mean/std of pixel values scaled to [0,1]; order R,G,B.
struct ChannelStats {
  std::array<double, 3> mean = {0.0, 0.0, 0.0};
  std::array<double, 3> std_dev = {1.0, 1.0, 1.0};
};

// Population statistics over every pixel of every (decoded, square-resized)
// image in the manifest; std is clamped to >= 1e-6.
ChannelStats compute_channel_stats(const DatasetManifest& manifest, int preprocessed_size);

// CSV "channel,mean,std" with 17-significant-digit floats.
void write_stats_csv(const std::filesystem::path& path, const ChannelStats& stats);
ChannelStats read_stats_csv(const std::filesystem::path& path);

// (pixel/255 - mean[c]) / std[c], channel-first [3,S,S].
// expected_size 0 accepts any square size.
Tensor normalize_image(const Image& image, const ChannelStats& stats, int expected_size = 0);
// Inverse mapping back to pixel/255 scale.
std::vector<double> denormalize(const Tensor& normalized, const ChannelStats& stats);

struct AugmentPolicy {
  double horizontal_flip_prob = 0.0;
  int crop_padding = 0;
  double zoom_lo = 1.0;  // 0 < lo <= 1
  double zoom_hi = 1.0;  // hi >= 1
  std::uint64_t seed = 0;

  void validate() const;
  bool is_identity() const {
    return horizontal_flip_prob == 0.0 && crop_padding == 0 && zoom_lo == 1.0 && zoom_hi == 1.0;
  }
};

// zoom -> padded random crop -> horizontal flip. All randomness is derived
// from (policy.seed, sample_index), so replays are bit-exact regardless of
// processing order.
Image augment(const Image& image, const AugmentPolicy& policy, std::uint64_t sample_index);

// Stratified split: per label, a seeded shuffle then floor(fraction*n) into
// train, remainder into val. Never leaves a label without training samples.
std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                          double train_fraction, std::uint64_t seed);

// Decoded and square-resized images held in memory for training/evaluation.
struct LoadedDataset {
  std::vector<Image> images;
  std::vector<std::size_t> labels;
  std::vector<std::string> paths;

  std::size_t size() const { return images.size(); }
};

LoadedDataset load_dataset(const DatasetManifest& manifest, int input_size);

}  // namespace binbrain
