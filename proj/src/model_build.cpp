#include <algorithm>
#include <cmath>

#include "binbrain/errors.hpp"
#include "binbrain/model.hpp"
#include "binbrain/util.hpp"

namespace binbrain {

namespace {

constexpr int kSupportedSizes[] = {32, 64, 128, 512};

void check_build_args(int width, int input_size, const std::vector<std::string>& labels, int hidden) {
  bool ok = false;
  for (int s : kSupportedSizes) ok = ok || s == input_size;
  if (!ok) fail(Errc::unsupported_input_size, std::to_string(input_size) + " (supported: 32/64/128/512)");
  if (width < 4) fail(Errc::invalid_config, "width must be >= 4");
  if (hidden < 1) fail(Errc::invalid_config, "hidden width must be >= 1");
  if (labels.size() < 2) fail(Errc::invalid_config, "need at least two class labels");
}

// Fan-in-scaled uniform: U(-sqrt(6/fan_in), sqrt(6/fan_in)). Only weights
// consume draws; the derivation order is the parameter visitation order.
void init_weight(Tensor& weight, std::size_t fan_in, Rng& rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : weight.values_mut()) v = rng.symmetric(bound);
}

Conv2d make_conv(std::size_t out_c, std::size_t in_c, std::size_t k, int stride, int padding,
                 bool with_bias, Rng& rng) {
  Conv2d conv;
  conv.weight = Tensor::zeros({out_c, in_c, k, k}, true);
  init_weight(conv.weight, in_c * k * k, rng);
  if (with_bias) conv.bias = Tensor::zeros({out_c}, true);
  conv.stride = stride;
  conv.padding = padding;
  return conv;
}

BatchNorm make_bn(std::size_t channels) {
  BatchNorm bn;
  bn.gamma = Tensor::full({channels}, 1.0, true);
  bn.beta = Tensor::zeros({channels}, true);
  bn.running_mean = Tensor::zeros({channels});
  bn.running_var = Tensor::full({channels}, 1.0);
  return bn;
}

Linear make_linear(std::size_t in_f, std::size_t out_f, Rng& rng) {
  Linear lin;
  lin.weight = Tensor::zeros({in_f, out_f}, true);
  init_weight(lin.weight, in_f, rng);
  lin.bias = Tensor::zeros({out_f}, true);
  return lin;
}

BasicBlock make_block(std::size_t in_c, std::size_t out_c, int stride, Rng& rng) {
  BasicBlock block;
  block.conv1 = make_conv(out_c, in_c, 3, stride, 1, false, rng);
  block.bn1 = make_bn(out_c);
  block.conv2 = make_conv(out_c, out_c, 3, 1, 1, false, rng);
  block.bn2 = make_bn(out_c);
  if (stride != 1 || in_c != out_c) {
    Downsample down;
    down.conv = make_conv(out_c, in_c, 1, stride, 0, false, rng);
    down.bn = make_bn(out_c);
    block.downsample = down;
  }
  return block;
}

void append_head(Model& model, std::size_t features, int hidden, std::size_t classes, Rng& rng) {
  model.layers().push_back({"head.fc1", make_linear(features, static_cast<std::size_t>(hidden), rng)});
  model.layers().push_back({"head.relu", ReluMarker{}});
  model.layers().push_back({"head.fc2", make_linear(static_cast<std::size_t>(hidden), classes, rng)});
  model.layers().push_back({"head.log_softmax", LogSoftmaxMarker{}});
}

}  // namespace

Model build_mini_resnet18(int width, int input_size, const std::vector<std::string>& labels,
                          int hidden, std::uint64_t seed) {
  check_build_args(width, input_size, labels, hidden);
  Rng rng(seed);
  Model model;
  const std::size_t w = static_cast<std::size_t>(width);

  // 32-pixel inputs keep a 3x3 stride-1 stem; larger inputs get the 7x7
  // stride-2 stem. Both are followed by a 2x2 max-pool.
  if (input_size == 32)
    model.layers().push_back({"stem.conv", make_conv(w, 3, 3, 1, 1, false, rng)});
  else
    model.layers().push_back({"stem.conv", make_conv(w, 3, 7, 2, 3, false, rng)});
  model.layers().push_back({"stem.bn", make_bn(w)});
  model.layers().push_back({"stem.relu", ReluMarker{}});
  model.layers().push_back({"stem.pool", MaxPoolSpec{2, 2}});

  std::size_t channels = w;
  for (int stage = 1; stage <= 4; ++stage) {
    std::size_t out_c = w << (stage - 1);
    int stride = stage == 1 ? 1 : 2;
    std::string base = "stage" + std::to_string(stage);
    model.layers().push_back({base + ".block1", make_block(channels, out_c, stride, rng)});
    model.layers().push_back({base + ".block2", make_block(out_c, out_c, 1, rng)});
    channels = out_c;
  }

  model.layers().push_back({"gap", GlobalAvgPoolMarker{}});
  model.layers().push_back({"flatten", FlattenMarker{}});
  append_head(model, channels, hidden, labels.size(), rng);

  model.meta() = {"mini_resnet18", width, input_size, hidden, labels, ChannelStats{}, channels};
  return model;
}

Model build_mini_vgg(int width, int input_size, const std::vector<std::string>& labels, int hidden,
                     std::uint64_t seed) {
  check_build_args(width, input_size, labels, hidden);
  Rng rng(seed);
  Model model;
  const std::size_t w = static_cast<std::size_t>(width);

  std::size_t channels = 3;
  std::size_t spatial = static_cast<std::size_t>(input_size);
  for (int blk = 1; blk <= 3; ++blk) {
    std::size_t out_c = w << (blk - 1);
    std::string base = "block" + std::to_string(blk);
    model.layers().push_back({base + ".conv1", make_conv(out_c, channels, 3, 1, 1, true, rng)});
    model.layers().push_back({base + ".relu1", ReluMarker{}});
    model.layers().push_back({base + ".conv2", make_conv(out_c, out_c, 3, 1, 1, true, rng)});
    model.layers().push_back({base + ".relu2", ReluMarker{}});
    model.layers().push_back({base + ".pool", MaxPoolSpec{2, 2}});
    channels = out_c;
    spatial /= 2;
  }

  model.layers().push_back({"flatten", FlattenMarker{}});
  std::size_t features = channels * spatial * spatial;
  append_head(model, features, hidden, labels.size(), rng);

  model.meta() = {"mini_vgg", width, input_size, hidden, labels, ChannelStats{}, features};
  return model;
}

Model build_model(const std::string& arch, int width, int input_size,
                  const std::vector<std::string>& labels, int hidden, std::uint64_t seed) {
  if (arch == "mini_resnet18") return build_mini_resnet18(width, input_size, labels, hidden, seed);
  if (arch == "mini_vgg") return build_mini_vgg(width, input_size, labels, hidden, seed);
  fail(Errc::invalid_config, "unknown architecture '" + arch + "'");
}

void attach_classifier_head(Model& model, int hidden, const std::vector<std::string>& labels,
                            std::uint64_t seed) {
  if (hidden < 1) fail(Errc::invalid_config, "hidden width must be >= 1");
  if (labels.size() < 2) fail(Errc::invalid_config, "need at least two class labels");
  auto& layers = model.layers();
  auto flatten = std::find_if(layers.begin(), layers.end(), [](const NamedLayer& l) {
    return std::holds_alternative<FlattenMarker>(l.layer);
  });
  if (flatten == layers.end())
    fail(Errc::no_feature_vector, "model has no flatten point to attach a head to");
  layers.erase(flatten + 1, layers.end());

  Rng rng(seed);
  append_head(model, model.meta().feature_size, hidden, labels.size(), rng);
  model.meta().hidden = hidden;
  model.meta().labels = labels;
}

}  // namespace binbrain
