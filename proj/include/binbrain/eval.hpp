#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "binbrain/data.hpp"
#include "binbrain/model.hpp"

namespace binbrain {

// Rows are true labels, columns predictions, in vocabulary order.
struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::uint64_t> counts;  // row-major K x K

  explicit ConfusionMatrix(std::vector<std::string> label_names);

  std::size_t k() const { return labels.size(); }
  std::uint64_t at(std::size_t row, std::size_t col) const { return counts[row * k() + col]; }
  void add(std::size_t true_label, std::size_t predicted);
  std::uint64_t total() const;
  std::uint64_t trace() const;
  double accuracy() const;  // trace/total
};

// Percentages 100*count/row_total, row-major; every row must be non-empty.
std::vector<double> row_normalize(const ConfusionMatrix& cm);

struct SampleRecord {
  std::string path;
  std::size_t true_label = 0;
  std::size_t predicted = 0;
  double confidence = 0.0;  // max class probability
};

struct EvalResult {
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  std::vector<SampleRecord> records;
};

// Eval-mode pass over the dataset; per-sample records feed the correct /
// misclassified listing.
EvalResult evaluate(Model& model, const LoadedDataset& dataset, const ChannelStats& stats,
                    int batch_size = 32);

// counts block followed by a one-decimal percentage block (when every row
// has samples).
void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& path);
void write_records_csv(const std::vector<SampleRecord>& records,
                       const std::vector<std::string>& labels, const std::filesystem::path& path);

enum class LayerSelector { initial, middle, last };
LayerSelector layer_selector_from_name(const std::string& name);

struct FeatureMapSet {
  std::string layer_path;
  Shape shape;                     // [C,H,W]
  std::vector<double> activations;
  std::vector<double> normalized;  // per-channel min-max to [0,1]; flat channels map to 0
};

// Captures the post-activation output at a fixed architectural position:
// first conv stage (initial), midpoint stage (middle), final stage (last).
FeatureMapSet extract_feature_maps(Model& model, const Tensor& input, LayerSelector selector);

// One PGM tile per channel plus a montage grid.
void write_feature_map_pgms(const FeatureMapSet& maps, const std::filesystem::path& out_dir,
                            const std::string& prefix);

}  // namespace binbrain
