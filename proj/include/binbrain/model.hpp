#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "binbrain/data.hpp"
#include "binbrain/nn.hpp"
#include "binbrain/tensor.hpp"

namespace binbrain {

enum class Mode { train, eval };

enum class FreezePolicy {
  none,                // everything trainable
  head_only,           // only the classifier head
  feature_extraction,  // head plus the last three conv layers (and their bn affines)
  fine_tune,           // everything trainable
};

FreezePolicy freeze_policy_from_name(const std::string& name);
std::string freeze_policy_name(FreezePolicy policy);

struct ReluMarker {};
struct FlattenMarker {};
struct LogSoftmaxMarker {};
struct MaxPoolSpec {
  int window = 2;
  int stride = 2;
};
struct GlobalAvgPoolMarker {};

using Layer = std::variant<Conv2d, BatchNorm, ReluMarker, MaxPoolSpec, GlobalAvgPoolMarker,
                           FlattenMarker, Linear, LogSoftmaxMarker, BasicBlock>;

struct NamedLayer {
  std::string name;
  Layer layer;
};

struct ModelMeta {
  std::string arch;       // "mini_resnet18" | "mini_vgg"
  int width = 0;          // base channel count
  int input_size = 0;
  int hidden = 0;         // classifier hidden width
  std::vector<std::string> labels;
  ChannelStats stats;     // channel normalization used at train time
  std::size_t feature_size = 0;  // flattened features entering the head
};

// Ordered layer list with named parameter slots. Forward produces [N, K]
// log-probabilities. A model is exclusively owned while training; eval-mode
// forwards are read-only and deterministic.
class Model {
 public:
  ModelMeta& meta() { return meta_; }
  const ModelMeta& meta() const { return meta_; }
  std::vector<NamedLayer>& layers() { return layers_; }
  const std::vector<NamedLayer>& layers() const { return layers_; }

  Tensor forward(const Tensor& input, Mode mode);
  // Observer sees every top-level layer output, keyed by layer name.
  Tensor forward_observed(const Tensor& input, Mode mode,
                          const std::function<void(const std::string&, const Tensor&)>& observer);

  // Trainable parameter slots (weights, biases, bn affines) in forward
  // order; the order also fixes initialization and checkpoint layout.
  void visit_parameters(const std::function<void(const std::string&, Tensor&)>& fn);
  // Batch-norm running statistics.
  void visit_buffers(const std::function<void(const std::string&, Tensor&)>& fn);

  std::map<std::string, bool> trainable_mask();
  std::size_t parameter_count();
  void zero_grads();

  // Convolution layer paths (downsample convs included) in forward order.
  std::vector<std::string> conv_paths();

 private:
  ModelMeta meta_;
  std::vector<NamedLayer> layers_;
};

// Desk-scale architectures. Parameters derive deterministically from the
// seed: weights draw from a fan-in-scaled uniform in visitation order,
// biases and bn shifts start at zero, bn scales at one.
Model build_mini_resnet18(int width, int input_size, const std::vector<std::string>& labels,
                          int hidden, std::uint64_t seed);
Model build_mini_vgg(int width, int input_size, const std::vector<std::string>& labels, int hidden,
                     std::uint64_t seed);
Model build_model(const std::string& arch, int width, int input_size,
                  const std::vector<std::string>& labels, int hidden, std::uint64_t seed);

// Replaces everything after the flatten point with
// linear -> relu -> linear -> log_softmax, freshly initialized from seed.
// Backbone parameters are untouched.
void attach_classifier_head(Model& model, int hidden, const std::vector<std::string>& labels,
                            std::uint64_t seed);

// Rewrites the trainable flags only; parameter values are never modified.
void apply_freeze_policy(Model& model, FreezePolicy policy);

// The conv layers feature_extraction unfreezes, with their bn partners.
std::vector<std::string> last_conv_layers(Model& model, std::size_t count);

}  // namespace binbrain
