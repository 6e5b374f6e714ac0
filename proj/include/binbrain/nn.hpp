#pragma once

#include <optional>

#include "binbrain/tensor.hpp"

namespace binbrain {

// Layer parameter bundles. These are owned by models; the op functions below
// are pure except for batchnorm, which updates its running statistics when
// called in training mode.

struct Conv2d {
  Tensor weight;  // [out_channels, in_channels, kh, kw]
  Tensor bias;    // [out_channels], undefined for bias-less convolutions
  int stride = 1;
  int padding = 0;  // symmetric zero padding
};

struct BatchNorm {
  Tensor gamma;         // [C]
  Tensor beta;          // [C]
  Tensor running_mean;  // [C], state buffer
  Tensor running_var;   // [C], state buffer
  double momentum = 0.1;
  double epsilon = 1e-5;
};

struct Linear {
  Tensor weight;  // [in_features, out_features]
  Tensor bias;    // [out_features]
};

struct Downsample {
  Conv2d conv;  // 1x1, stride matching the block
  BatchNorm bn;
};

// Two 3x3 conv+bn stages added onto a shortcut. The downsample path is
// present exactly when the block changes stride or channel count.
struct BasicBlock {
  Conv2d conv1;
  BatchNorm bn1;
  Conv2d conv2;
  BatchNorm bn2;
  std::optional<Downsample> downsample;
};

// Cross-correlation (no kernel flip) with zero padding.
// input [N,C,H,W] -> [N,outC,H',W'], H' = floor((H + 2p - kh)/stride) + 1.
Tensor conv2d(const Tensor& input, const Conv2d& layer);

// Training mode normalizes by batch statistics (population variance) and
// folds them into the running buffers; eval mode applies the running stats.
Tensor batchnorm(const Tensor& input, BatchNorm& layer, bool training);

// max(0, x); the subgradient at 0 is 0.
Tensor relu(const Tensor& input);

// Window maximum, no padding; gradient routes to the first maximum in
// row-major window order.
Tensor max_pool2d(const Tensor& input, int window, int stride);

// [N,C,H,W] -> [N,C,1,1] mean over the spatial extent.
Tensor global_avg_pool2d(const Tensor& input);

// input [N,F] * weight [F,G] + bias.
Tensor linear(const Tensor& input, const Linear& layer);

// Row-wise x - max - log(sum exp(x - max)); exp of a row sums to 1.
Tensor log_softmax(const Tensor& input);

// relu(bn2(conv2(relu(bn1(conv1(x))))) + shortcut(x))
Tensor residual_block(const Tensor& input, BasicBlock& block, bool training);

}  // namespace binbrain
