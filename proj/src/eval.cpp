#include "binbrain/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "binbrain/errors.hpp"
#include "binbrain/util.hpp"

namespace binbrain {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> label_names)
    : labels(std::move(label_names)), counts(labels.size() * labels.size(), 0) {}

void ConfusionMatrix::add(std::size_t true_label, std::size_t predicted) {
  if (true_label >= k() || predicted >= k())
    fail(Errc::target_out_of_range, "confusion matrix index out of range");
  counts[true_label * k() + predicted] += 1;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (std::uint64_t c : counts) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < k(); ++i) t += at(i, i);
  return t;
}

double ConfusionMatrix::accuracy() const {
  std::uint64_t n = total();
  if (n == 0) fail(Errc::empty_dataset, "confusion matrix has no samples");
  return static_cast<double>(trace()) / static_cast<double>(n);
}

std::vector<double> row_normalize(const ConfusionMatrix& cm) {
  std::vector<double> pct(cm.counts.size());
  for (std::size_t r = 0; r < cm.k(); ++r) {
    std::uint64_t row_total = 0;
    for (std::size_t c = 0; c < cm.k(); ++c) row_total += cm.at(r, c);
    if (row_total == 0) fail(Errc::empty_row, "row '" + cm.labels[r] + "' has no samples");
    for (std::size_t c = 0; c < cm.k(); ++c)
      pct[r * cm.k() + c] = 100.0 * static_cast<double>(cm.at(r, c)) / static_cast<double>(row_total);
  }
  return pct;
}

EvalResult evaluate(Model& model, const LoadedDataset& dataset, const ChannelStats& stats,
                    int batch_size) {
  if (dataset.size() == 0) fail(Errc::empty_dataset, "nothing to evaluate");
  const std::vector<std::string>& labels = model.meta().labels;
  for (std::size_t label : dataset.labels)
    if (label >= labels.size()) fail(Errc::target_out_of_range, "dataset label exceeds model head");

  EvalResult result{0.0, ConfusionMatrix(labels), {}};
  const std::size_t n = dataset.size();
  const std::size_t bs = static_cast<std::size_t>(std::max(batch_size, 1));
  const std::size_t k = labels.size();
  const std::size_t chw = 3ull * model.meta().input_size * model.meta().input_size;

  for (std::size_t start = 0; start < n; start += bs) {
    std::size_t count = std::min(bs, n - start);
    Tensor batch = Tensor::zeros({count, 3, static_cast<std::size_t>(model.meta().input_size),
                                  static_cast<std::size_t>(model.meta().input_size)});
    double* dst = batch.values_mut().data();
    for (std::size_t i = 0; i < count; ++i) {
      Tensor one = normalize_image(dataset.images[start + i], stats, model.meta().input_size);
      std::memcpy(dst + i * chw, one.values().data(), chw * sizeof(double));
    }
    Tensor logp = model.forward(batch, Mode::eval);
    const double* lp = logp.values().data();
    for (std::size_t i = 0; i < count; ++i) {
      const double* row = lp + i * k;
      std::size_t best = 0;
      for (std::size_t j = 1; j < k; ++j)
        if (row[j] > row[best]) best = j;
      result.confusion.add(dataset.labels[start + i], best);
      result.records.push_back({dataset.paths[start + i], dataset.labels[start + i], best,
                                std::exp(row[best])});
    }
  }
  result.accuracy = result.confusion.accuracy();
  return result;
}

void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& path) {
  std::string out = "section,true";
  for (const auto& label : cm.labels) out += "," + label;
  out += "\n";
  for (std::size_t r = 0; r < cm.k(); ++r) {
    out += "counts," + cm.labels[r];
    for (std::size_t c = 0; c < cm.k(); ++c) out += "," + std::to_string(cm.at(r, c));
    out += "\n";
  }
  bool all_rows = true;
  for (std::size_t r = 0; r < cm.k(); ++r) {
    std::uint64_t row_total = 0;
    for (std::size_t c = 0; c < cm.k(); ++c) row_total += cm.at(r, c);
    all_rows = all_rows && row_total > 0;
  }
  if (all_rows) {
    auto pct = row_normalize(cm);
    for (std::size_t r = 0; r < cm.k(); ++r) {
      out += "percent," + cm.labels[r];
      for (std::size_t c = 0; c < cm.k(); ++c) out += "," + fmt_fixed(pct[r * cm.k() + c], 1);
      out += "\n";
    }
  }
  write_file_text(path, out);
}

void write_records_csv(const std::vector<SampleRecord>& records,
                       const std::vector<std::string>& labels, const std::filesystem::path& path) {
  std::string out = "path,true,predicted,confidence\n";
  for (const auto& rec : records)
    out += rec.path + "," + labels[rec.true_label] + "," + labels[rec.predicted] + "," +
           fmt_g17(rec.confidence) + "\n";
  write_file_text(path, out);
}

LayerSelector layer_selector_from_name(const std::string& name) {
  if (name == "initial") return LayerSelector::initial;
  if (name == "middle") return LayerSelector::middle;
  if (name == "last") return LayerSelector::last;
  fail(Errc::unknown_selector, "'" + name + "' (expected initial/middle/last)");
}

namespace {

std::string tap_layer_name(const Model& model, LayerSelector selector) {
  const std::string& arch = model.meta().arch;
  if (arch == "mini_resnet18") {
    switch (selector) {
      case LayerSelector::initial: return "stem.relu";
      case LayerSelector::middle: return "stage2.block2";
      case LayerSelector::last: return "stage4.block2";
    }
  } else if (arch == "mini_vgg") {
    switch (selector) {
      case LayerSelector::initial: return "block1.relu1";
      case LayerSelector::middle: return "block2.relu2";
      case LayerSelector::last: return "block3.relu2";
    }
  }
  fail(Errc::unknown_selector, "no capture point for architecture '" + arch + "'");
}

}  // namespace

FeatureMapSet extract_feature_maps(Model& model, const Tensor& input, LayerSelector selector) {
  if (input.rank() != 3 || input.dim(0) != 3)
    fail(Errc::shape_mismatch, "expected a normalized [3,S,S] input, got " + shape_str(input.shape()));
  std::string wanted = tap_layer_name(model, selector);

  Tensor captured;
  Tensor batch = input.reshape({1, input.dim(0), input.dim(1), input.dim(2)});
  model.forward_observed(batch, Mode::eval, [&](const std::string& name, const Tensor& out) {
    if (name == wanted) captured = out;
  });
  if (!captured.defined()) fail(Errc::unknown_selector, "layer '" + wanted + "' never produced output");

  FeatureMapSet maps;
  maps.layer_path = wanted;
  maps.shape = {captured.dim(1), captured.dim(2), captured.dim(3)};
  maps.activations.assign(captured.values().begin(), captured.values().end());
  maps.normalized.resize(maps.activations.size());
  const std::size_t hw = maps.shape[1] * maps.shape[2];
  for (std::size_t c = 0; c < maps.shape[0]; ++c) {
    const double* src = maps.activations.data() + c * hw;
    double lo = *std::min_element(src, src + hw);
    double hi = *std::max_element(src, src + hw);
    double* dst = maps.normalized.data() + c * hw;
    if (hi > lo) {
      for (std::size_t i = 0; i < hw; ++i) dst[i] = (src[i] - lo) / (hi - lo);
    } else {
      std::fill(dst, dst + hw, 0.0);  // constant channel
    }
  }
  return maps;
}

void write_feature_map_pgms(const FeatureMapSet& maps, const std::filesystem::path& out_dir,
                            const std::string& prefix) {
  std::filesystem::create_directories(out_dir);
  const std::size_t channels = maps.shape[0];
  const int h = static_cast<int>(maps.shape[1]);
  const int w = static_cast<int>(maps.shape[2]);
  const std::size_t hw = maps.shape[1] * maps.shape[2];

  auto to_u8 = [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };

  for (std::size_t c = 0; c < channels; ++c) {
    std::vector<std::uint8_t> tile(hw);
    for (std::size_t i = 0; i < hw; ++i) tile[i] = to_u8(maps.normalized[c * hw + i]);
    write_pgm(out_dir / (prefix + "_ch" + std::to_string(c) + ".pgm"), tile, w, h);
  }

  // Montage: near-square grid with 1px white separators.
  std::size_t cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(channels))));
  std::size_t rows = (channels + cols - 1) / cols;
  int mw = static_cast<int>(cols) * (w + 1) - 1;
  int mh = static_cast<int>(rows) * (h + 1) - 1;
  std::vector<std::uint8_t> montage(static_cast<std::size_t>(mw) * mh, 255);
  for (std::size_t c = 0; c < channels; ++c) {
    std::size_t gx = (c % cols) * (w + 1);
    std::size_t gy = (c / cols) * (h + 1);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        montage[(gy + y) * mw + gx + x] = to_u8(maps.normalized[c * hw + y * w + x]);
  }
  write_pgm(out_dir / (prefix + "_montage.pgm"), montage, mw, mh);
}

}  // namespace binbrain
