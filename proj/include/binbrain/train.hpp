#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "binbrain/data.hpp"
#include "binbrain/model.hpp"
#include "binbrain/tensor.hpp"

namespace binbrain {

struct TrainConfig {
  int epochs = 25;
  int batch_size = 16;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  FreezePolicy freeze = FreezePolicy::none;
  AugmentPolicy augment;
  // When false the loop normalizes with the running statistics and leaves
  // them untouched (useful when transferring a calibrated backbone).
  bool update_batchnorm_stats = true;
  double saturation_delta = 0.001;
  int saturation_patience = 3;

  void validate() const;
  std::string echo() const;  // flat key=value lines
};

// First/second moment estimates per parameter path plus the shared step
// counter; t advances exactly once per optimizer step.
struct AdamState {
  struct Slot {
    std::vector<double> m, v;
  };
  std::map<std::string, Slot> slots;
  std::int64_t step_count = 0;
};

// -(1/N) sum of log_probs[i, target_i].
Tensor nll_loss(const Tensor& log_probs, const std::vector<std::size_t>& targets);

// One bias-corrected update of a single parameter array; t is the step
// counter value after incrementing.
void adam_apply(std::span<double> param, std::span<const double> grad, std::vector<double>& m,
                std::vector<double>& v, std::int64_t t, const TrainConfig& config);

// Updates every trainable parameter from its accumulated gradient; frozen
// parameters are skipped entirely.
void adam_step(Model& model, AdamState& state, const TrainConfig& config);

struct TrainingReport {
  std::vector<double> train_loss, val_loss, train_accuracy, val_accuracy;
  std::vector<double> epoch_seconds;  // wall clock, excluded from determinism
  std::optional<int> saturation_epoch;  // 1-based
  std::string config_echo;
};

// CSV "epoch,train_loss,val_loss,train_acc,val_acc,seconds". All columns are
// byte-deterministic except the quarantined seconds column.
void write_report_csv(const TrainingReport& report, const std::filesystem::path& path);

// Smallest epoch e with no improvement of the running-best accuracy by at
// least delta anywhere in (e, e+patience]; the window must lie inside the
// series.
std::optional<int> detect_saturation(const std::vector<double>& val_accuracy, double delta,
                                     int patience);

struct EvalMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Eval-mode loss/accuracy over a dataset (no augmentation).
EvalMetrics evaluate_metrics(Model& model, const LoadedDataset& dataset, const ChannelStats& stats,
                             int batch_size);

// The epoch loop: seeded shuffle, augment -> normalize -> forward -> loss ->
// backward -> optimizer, then eval-mode metrics on both sets per epoch.
TrainingReport train(Model& model, const LoadedDataset& train_set, const LoadedDataset& val_set,
                     const TrainConfig& config, const ChannelStats& stats);

}  // namespace binbrain
