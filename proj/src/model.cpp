#include "binbrain/model.hpp"

#include <algorithm>

#include "binbrain/errors.hpp"
#include "binbrain/ops.hpp"

namespace binbrain {

FreezePolicy freeze_policy_from_name(const std::string& name) {
  if (name == "none") return FreezePolicy::none;
  if (name == "head_only") return FreezePolicy::head_only;
  if (name == "feature_extraction") return FreezePolicy::feature_extraction;
  if (name == "fine_tune") return FreezePolicy::fine_tune;
  fail(Errc::unknown_policy, "'" + name + "'");
}

std::string freeze_policy_name(FreezePolicy policy) {
  switch (policy) {
    case FreezePolicy::none: return "none";
    case FreezePolicy::head_only: return "head_only";
    case FreezePolicy::feature_extraction: return "feature_extraction";
    case FreezePolicy::fine_tune: return "fine_tune";
  }
  fail(Errc::unknown_policy, "corrupt policy value");
}

namespace {

struct LayerForward {
  const Tensor& x;
  Mode mode;

  Tensor operator()(Conv2d& l) { return conv2d(x, l); }
  Tensor operator()(BatchNorm& l) { return batchnorm(x, l, mode == Mode::train); }
  Tensor operator()(ReluMarker&) { return relu(x); }
  Tensor operator()(MaxPoolSpec& l) { return max_pool2d(x, l.window, l.stride); }
  Tensor operator()(GlobalAvgPoolMarker&) { return global_avg_pool2d(x); }
  Tensor operator()(FlattenMarker&) {
    return x.reshape({x.dim(0), x.numel() / x.dim(0)});
  }
  Tensor operator()(Linear& l) { return linear(x, l); }
  Tensor operator()(LogSoftmaxMarker&) { return log_softmax(x); }
  Tensor operator()(BasicBlock& l) { return residual_block(x, l, mode == Mode::train); }
};

void visit_conv(const std::string& path, Conv2d& conv,
                const std::function<void(const std::string&, Tensor&)>& fn) {
  fn(path + ".weight", conv.weight);
  if (conv.bias.defined()) fn(path + ".bias", conv.bias);
}

void visit_bn_params(const std::string& path, BatchNorm& bn,
                     const std::function<void(const std::string&, Tensor&)>& fn) {
  fn(path + ".gamma", bn.gamma);
  fn(path + ".beta", bn.beta);
}

}  // namespace

Tensor Model::forward(const Tensor& input, Mode mode) {
  Tensor x = input;
  for (auto& named : layers_) x = std::visit(LayerForward{x, mode}, named.layer);
  return x;
}

Tensor Model::forward_observed(const Tensor& input, Mode mode,
                               const std::function<void(const std::string&, const Tensor&)>& observer) {
  Tensor x = input;
  for (auto& named : layers_) {
    x = std::visit(LayerForward{x, mode}, named.layer);
    observer(named.name, x);
  }
  return x;
}

void Model::visit_parameters(const std::function<void(const std::string&, Tensor&)>& fn) {
  for (auto& named : layers_) {
    const std::string& name = named.name;
    if (auto* conv = std::get_if<Conv2d>(&named.layer)) {
      visit_conv(name, *conv, fn);
    } else if (auto* bn = std::get_if<BatchNorm>(&named.layer)) {
      visit_bn_params(name, *bn, fn);
    } else if (auto* lin = std::get_if<Linear>(&named.layer)) {
      fn(name + ".weight", lin->weight);
      fn(name + ".bias", lin->bias);
    } else if (auto* block = std::get_if<BasicBlock>(&named.layer)) {
      visit_conv(name + ".conv1", block->conv1, fn);
      visit_bn_params(name + ".bn1", block->bn1, fn);
      visit_conv(name + ".conv2", block->conv2, fn);
      visit_bn_params(name + ".bn2", block->bn2, fn);
      if (block->downsample) {
        visit_conv(name + ".downsample.conv", block->downsample->conv, fn);
        visit_bn_params(name + ".downsample.bn", block->downsample->bn, fn);
      }
    }
  }
}

void Model::visit_buffers(const std::function<void(const std::string&, Tensor&)>& fn) {
  auto visit_bn_buffers = [&fn](const std::string& path, BatchNorm& bn) {
    fn(path + ".running_mean", bn.running_mean);
    fn(path + ".running_var", bn.running_var);
  };
  for (auto& named : layers_) {
    if (auto* bn = std::get_if<BatchNorm>(&named.layer)) {
      visit_bn_buffers(named.name, *bn);
    } else if (auto* block = std::get_if<BasicBlock>(&named.layer)) {
      visit_bn_buffers(named.name + ".bn1", block->bn1);
      visit_bn_buffers(named.name + ".bn2", block->bn2);
      if (block->downsample) visit_bn_buffers(named.name + ".downsample.bn", block->downsample->bn);
    }
  }
}

std::map<std::string, bool> Model::trainable_mask() {
  std::map<std::string, bool> mask;
  visit_parameters([&](const std::string& path, Tensor& t) { mask[path] = t.requires_grad(); });
  return mask;
}

std::size_t Model::parameter_count() {
  std::size_t total = 0;
  visit_parameters([&](const std::string&, Tensor& t) { total += t.numel(); });
  return total;
}

void Model::zero_grads() {
  visit_parameters([](const std::string&, Tensor& t) { t.zero_grad(); });
}

std::vector<std::string> Model::conv_paths() {
  std::vector<std::string> paths;
  for (auto& named : layers_) {
    if (std::holds_alternative<Conv2d>(named.layer)) {
      paths.push_back(named.name);
    } else if (auto* block = std::get_if<BasicBlock>(&named.layer)) {
      paths.push_back(named.name + ".conv1");
      paths.push_back(named.name + ".conv2");
      if (block->downsample) paths.push_back(named.name + ".downsample.conv");
    }
  }
  return paths;
}

std::vector<std::string> last_conv_layers(Model& model, std::size_t count) {
  auto paths = model.conv_paths();
  if (paths.size() > count) paths.erase(paths.begin(), paths.end() - static_cast<std::ptrdiff_t>(count));
  return paths;
}

void apply_freeze_policy(Model& model, FreezePolicy policy) {
  auto set_all = [&](bool on) {
    model.visit_parameters([on](const std::string&, Tensor& t) { t.set_requires_grad(on); });
  };
  switch (policy) {
    case FreezePolicy::none:
    case FreezePolicy::fine_tune:
      set_all(true);
      return;
    case FreezePolicy::head_only:
      model.visit_parameters([](const std::string& path, Tensor& t) {
        t.set_requires_grad(path.rfind("head.", 0) == 0);
      });
      return;
    case FreezePolicy::feature_extraction: {
      auto convs = last_conv_layers(model, 3);
      // A conv path "x.convN" unfreezes its bn partner "x.bnN"; downsample
      // convs pair with the downsample bn.
      std::vector<std::string> prefixes;
      for (const auto& conv : convs) {
        prefixes.push_back(conv + ".");
        std::string bn = conv;
        auto pos = bn.rfind(".conv");
        if (pos != std::string::npos) bn.replace(pos, 5, ".bn");
        prefixes.push_back(bn + ".");
      }
      model.visit_parameters([&](const std::string& path, Tensor& t) {
        bool on = path.rfind("head.", 0) == 0;
        for (const auto& prefix : prefixes)
          if (!on && path.rfind(prefix, 0) == 0) on = true;
        t.set_requires_grad(on);
      });
      return;
    }
  }
  fail(Errc::unknown_policy, "corrupt policy value");
}

}  // namespace binbrain
