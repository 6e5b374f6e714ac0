#include "binbrain/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <sstream>

#include "binbrain/autodiff.hpp"
#include "binbrain/errors.hpp"
#include "binbrain/kernels.hpp"
#include "binbrain/ops.hpp"
#include "binbrain/util.hpp"

namespace binbrain {

void TrainConfig::validate() const {
  if (epochs < 1) fail(Errc::invalid_config, "epochs must be >= 1");
  if (batch_size < 1) fail(Errc::invalid_config, "batch size must be >= 1");
  // zero is allowed: a no-op optimizer is the cheapest full-pipeline probe
  if (!(learning_rate >= 0.0)) fail(Errc::invalid_config, "learning rate must be non-negative");
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0))
    fail(Errc::invalid_config, "adam betas must lie in (0,1)");
  if (!(epsilon > 0.0)) fail(Errc::invalid_config, "adam epsilon must be positive");
  if (saturation_patience < 1) fail(Errc::invalid_config, "saturation patience must be >= 1");
  if (saturation_delta < 0.0) fail(Errc::invalid_config, "saturation delta must be >= 0");
  augment.validate();
}

std::string TrainConfig::echo() const {
  std::ostringstream out;
  out << "epochs=" << epochs << "\n"
      << "batch_size=" << batch_size << "\n"
      << "learning_rate=" << fmt_g17(learning_rate) << "\n"
      << "beta1=" << fmt_g17(beta1) << "\n"
      << "beta2=" << fmt_g17(beta2) << "\n"
      << "epsilon=" << fmt_g17(epsilon) << "\n"
      << "seed=" << seed << "\n"
      << "freeze=" << freeze_policy_name(freeze) << "\n"
      << "flip_prob=" << fmt_g17(augment.horizontal_flip_prob) << "\n"
      << "crop_padding=" << augment.crop_padding << "\n"
      << "zoom_lo=" << fmt_g17(augment.zoom_lo) << "\n"
      << "zoom_hi=" << fmt_g17(augment.zoom_hi) << "\n"
      << "augment_seed=" << augment.seed << "\n"
      << "update_batchnorm_stats=" << (update_batchnorm_stats ? 1 : 0) << "\n"
      << "saturation_delta=" << fmt_g17(saturation_delta) << "\n"
      << "saturation_patience=" << saturation_patience << "\n";
  return out.str();
}

Tensor nll_loss(const Tensor& log_probs, const std::vector<std::size_t>& targets) {
  if (log_probs.rank() != 2)
    fail(Errc::shape_mismatch, "nll_loss expects [N,K] log-probabilities, got " + shape_str(log_probs.shape()));
  const std::size_t n = log_probs.dim(0), k = log_probs.dim(1);
  if (targets.size() != n)
    fail(Errc::shape_mismatch, "nll_loss got " + std::to_string(targets.size()) + " targets for " +
                                   std::to_string(n) + " rows");
  for (std::size_t t : targets)
    if (t >= k) fail(Errc::target_out_of_range, "class " + std::to_string(t) + " of " + std::to_string(k));

  const double* lp = log_probs.values().data();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += lp[i * k + targets[i]];
  Tensor out = Tensor::scalar(-total / static_cast<double>(n));

  if (GradTape* tape = GradTape::current(); tape && log_probs.grad_tracked()) {
    auto shared_targets = std::make_shared<std::vector<std::size_t>>(targets);
    tape->record(out, [ii = log_probs.impl(), oi = out.impl(), shared_targets, n, k] {
      double g = (*oi->grad)[0];
      double* gin = ii->grad->data();
      const double scale = -g / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) gin[i * k + (*shared_targets)[i]] += scale;
    });
  }
  return out;
}

void adam_apply(std::span<double> param, std::span<const double> grad, std::vector<double>& m,
                std::vector<double>& v, std::int64_t t, const TrainConfig& config) {
  if (param.size() != grad.size() || m.size() != param.size() || v.size() != param.size())
    fail(Errc::shape_mismatch, "optimizer state does not match parameter size");
  for (double g : grad)
    if (!std::isfinite(g)) fail(Errc::non_finite_gradient, "gradient is not finite");
  double corr1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  double corr2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  kernels::active().adam_update(param.data(), grad.data(), m.data(), v.data(), param.size(),
                                config.learning_rate, config.beta1, config.beta2, config.epsilon,
                                corr1, corr2);
}

void adam_step(Model& model, AdamState& state, const TrainConfig& config) {
  state.step_count += 1;
  model.visit_parameters([&](const std::string& path, Tensor& t) {
    if (!t.requires_grad()) return;
    auto& slot = state.slots[path];
    if (slot.m.empty()) {
      slot.m.assign(t.numel(), 0.0);
      slot.v.assign(t.numel(), 0.0);
    }
    adam_apply(t.values_mut(), t.grad(), slot.m, slot.v, state.step_count, config);
  });
}

std::optional<int> detect_saturation(const std::vector<double>& val_accuracy, double delta,
                                     int patience) {
  if (patience < 1) fail(Errc::invalid_config, "patience must be >= 1");
  if (delta < 0.0) fail(Errc::invalid_config, "delta must be >= 0");
  const std::size_t n = val_accuracy.size();
  double best = 0.0;
  for (std::size_t e = 1; e <= n; ++e) {
    best = e == 1 ? val_accuracy[0] : std::max(best, val_accuracy[e - 1]);
    if (e + static_cast<std::size_t>(patience) > n) break;
    bool improved = false;
    for (std::size_t j = e; j < e + static_cast<std::size_t>(patience); ++j)
      if (val_accuracy[j] - best >= delta) improved = true;
    if (!improved) return static_cast<int>(e);
  }
  return std::nullopt;
}

void write_report_csv(const TrainingReport& report, const std::filesystem::path& path) {
  std::string out = "epoch,train_loss,val_loss,train_acc,val_acc,seconds\n";
  for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
    out += std::to_string(e + 1) + "," + fmt_g17(report.train_loss[e]) + "," +
           fmt_g17(report.val_loss[e]) + "," + fmt_g17(report.train_accuracy[e]) + "," +
           fmt_g17(report.val_accuracy[e]) + "," + fmt_g17(report.epoch_seconds[e]) + "\n";
  }
  write_file_text(path, out);
}

namespace {

// Stacks normalized images into one [B,3,S,S] tensor.
Tensor stack_batch(const std::vector<Tensor>& members) {
  const Shape& one = members.front().shape();
  Tensor batch = Tensor::zeros({members.size(), one[0], one[1], one[2]});
  double* dst = batch.values_mut().data();
  const std::size_t stride = members.front().numel();
  for (std::size_t i = 0; i < members.size(); ++i)
    std::memcpy(dst + i * stride, members[i].values().data(), stride * sizeof(double));
  return batch;
}

std::size_t argmax_row(const double* row, std::size_t k) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < k; ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

}  // namespace

EvalMetrics evaluate_metrics(Model& model, const LoadedDataset& dataset, const ChannelStats& stats,
                             int batch_size) {
  if (dataset.size() == 0) fail(Errc::empty_dataset, "evaluation set is empty");
  const std::size_t n = dataset.size();
  const std::size_t bs = static_cast<std::size_t>(std::max(batch_size, 1));
  double total_nll = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < n; start += bs) {
    std::size_t count = std::min(bs, n - start);
    std::vector<Tensor> members;
    members.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
      members.push_back(normalize_image(dataset.images[start + i], stats));
    Tensor logp = model.forward(stack_batch(members), Mode::eval);
    const double* lp = logp.values().data();
    const std::size_t k = logp.dim(1);
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t truth = dataset.labels[start + i];
      total_nll -= lp[i * k + truth];
      if (argmax_row(lp + i * k, k) == truth) ++correct;
    }
  }
  return {total_nll / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
}

TrainingReport train(Model& model, const LoadedDataset& train_set, const LoadedDataset& val_set,
                     const TrainConfig& config, const ChannelStats& stats) {
  config.validate();
  if (train_set.size() == 0 || val_set.size() == 0)
    fail(Errc::empty_dataset, "training requires non-empty train and val sets");
  const std::size_t classes = model.meta().labels.size();
  for (std::size_t label : train_set.labels)
    if (label >= classes) fail(Errc::target_out_of_range, "train label exceeds model head");
  for (std::size_t label : val_set.labels)
    if (label >= classes) fail(Errc::target_out_of_range, "val label exceeds model head");

  apply_freeze_policy(model, config.freeze);
  AdamState adam;
  TrainingReport report;
  report.config_echo = config.echo();

  const std::size_t n = train_set.size();
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  const bool bn_training = config.update_batchnorm_stats;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    auto order = seeded_permutation(n, mix_seed(config.seed, 0x45504F43ull + static_cast<std::uint64_t>(epoch)));

    for (std::size_t start = 0; start < n; start += bs) {
      std::size_t count = std::min(bs, n - start);
      std::vector<Tensor> members;
      std::vector<std::size_t> targets;
      members.reserve(count);
      targets.reserve(count);
      for (std::size_t i = 0; i < count; ++i) {
        std::size_t idx = order[start + i];
        // Augmentation stream index is global across epochs so every epoch
        // sees fresh but replayable variations.
        std::uint64_t sample_index = static_cast<std::uint64_t>(epoch) * n + start + i;
        Image aug = augment(train_set.images[idx], config.augment, sample_index);
        members.push_back(normalize_image(aug, stats));
        targets.push_back(train_set.labels[idx]);
      }

      model.zero_grads();
      GradTape tape;
      Tensor loss;
      {
        TapeScope scope(tape);
        Tensor logp = model.forward(stack_batch(members), bn_training ? Mode::train : Mode::eval);
        loss = nll_loss(logp, targets);
        if (!std::isfinite(loss.item()))
          fail(Errc::non_finite_loss, "epoch " + std::to_string(epoch + 1) + ", batch at sample " +
                                          std::to_string(start));
        tape.backward(loss);
      }
      adam_step(model, adam, config);
    }

    EvalMetrics train_m = evaluate_metrics(model, train_set, stats, config.batch_size);
    EvalMetrics val_m = evaluate_metrics(model, val_set, stats, config.batch_size);
    report.train_loss.push_back(train_m.loss);
    report.val_loss.push_back(val_m.loss);
    report.train_accuracy.push_back(train_m.accuracy);
    report.val_accuracy.push_back(val_m.accuracy);
    report.epoch_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }

  report.saturation_epoch =
      detect_saturation(report.val_accuracy, config.saturation_delta, config.saturation_patience);
  return report;
}

}  // namespace binbrain
