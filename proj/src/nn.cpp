#include <algorithm>
#include <cmath>
#include <vector>

#include "binbrain/autodiff.hpp"
#include "binbrain/errors.hpp"
#include "binbrain/kernels.hpp"
#include "binbrain/nn.hpp"
#include "binbrain/ops.hpp"

namespace binbrain {

Tensor relu(const Tensor& input) {
  Tensor out = Tensor::zeros(input.shape());
  kernels::active().relu(input.values().data(), out.values_mut().data(), input.numel());
  if (GradTape* tape = GradTape::current(); tape && input.grad_tracked()) {
    tape->record(out, [ii = input.impl(), oi = out.impl()] {
      kernels::active().relu_backward_accum(ii->grad->data(), ii->values->data(), oi->grad->data(),
                                            oi->grad->size());
    });
  }
  return out;
}

Tensor max_pool2d(const Tensor& input, int window, int stride) {
  if (input.rank() != 4)
    fail(Errc::shape_mismatch, "max_pool2d input must be [N,C,H,W], got " + shape_str(input.shape()));
  if (window < 1 || stride < 1) fail(Errc::invalid_config, "max_pool2d window and stride must be >= 1");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t win = static_cast<std::size_t>(window), st = static_cast<std::size_t>(stride);
  if (win > h || win > w)
    fail(Errc::window_too_large, "window " + std::to_string(window) + " exceeds input " + shape_str(input.shape()));
  const std::size_t oh = (h - win) / st + 1;
  const std::size_t ow = (w - win) / st + 1;

  Tensor out = Tensor::zeros({n, c, oh, ow});
  // Flat index of the winning element per output cell; ties go to the first
  // occurrence in row-major window order so the gradient is deterministic.
  auto argmax = std::make_shared<std::vector<std::size_t>>(n * c * oh * ow);
  const double* in = input.values().data();
  double* out_v = out.values_mut().data();
  std::size_t o = 0;
  for (std::size_t img = 0; img < n * c; ++img) {
    const double* plane = in + img * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
        std::size_t base = oy * st * w + ox * st;
        double best = plane[base];
        std::size_t best_idx = base;
        for (std::size_t ky = 0; ky < win; ++ky)
          for (std::size_t kx = 0; kx < win; ++kx) {
            std::size_t idx = base + ky * w + kx;
            if (plane[idx] > best) {
              best = plane[idx];
              best_idx = idx;
            }
          }
        out_v[o] = best;
        (*argmax)[o] = img * h * w + best_idx;
      }
  }

  if (GradTape* tape = GradTape::current(); tape && input.grad_tracked()) {
    tape->record(out, [ii = input.impl(), oi = out.impl(), argmax] {
      double* gin = ii->grad->data();
      const double* g = oi->grad->data();
      for (std::size_t i = 0; i < argmax->size(); ++i) gin[(*argmax)[i]] += g[i];
    });
  }
  return out;
}

Tensor global_avg_pool2d(const Tensor& input) {
  if (input.rank() != 4)
    fail(Errc::shape_mismatch, "global_avg_pool2d input must be [N,C,H,W], got " + shape_str(input.shape()));
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  Tensor out = Tensor::zeros({n, c, 1, 1});
  const double* in = input.values().data();
  double* out_v = out.values_mut().data();
  for (std::size_t i = 0; i < n * c; ++i) out_v[i] = kernels::active().reduce_sum(in + i * hw, hw) / static_cast<double>(hw);

  if (GradTape* tape = GradTape::current(); tape && input.grad_tracked()) {
    tape->record(out, [ii = input.impl(), oi = out.impl(), hw] {
      double* gin = ii->grad->data();
      const double* g = oi->grad->data();
      const double inv = 1.0 / static_cast<double>(hw);
      for (std::size_t i = 0; i < oi->grad->size(); ++i) {
        double spread = g[i] * inv;
        double* row = gin + i * hw;
        kernels::active().add_scalar(row, spread, row, hw);
      }
    });
  }
  return out;
}

Tensor linear(const Tensor& input, const Linear& layer) {
  if (input.rank() != 2)
    fail(Errc::shape_mismatch, "linear input must be [N,F], got " + shape_str(input.shape()));
  const std::size_t n = input.dim(0), f = input.dim(1);
  if (layer.weight.rank() != 2 || layer.weight.dim(0) != f)
    fail(Errc::shape_mismatch, "linear weight " + shape_str(layer.weight.shape()) + " does not accept " +
                                   std::to_string(f) + " features");
  const std::size_t g_out = layer.weight.dim(1);
  if (layer.bias.rank() != 1 || layer.bias.dim(0) != g_out)
    fail(Errc::shape_mismatch, "linear bias must be [" + std::to_string(g_out) + "]");

  Tensor out = Tensor::zeros({n, g_out});
  double* out_v = out.values_mut().data();
  kernels::active().gemm_nn(input.values().data(), layer.weight.values().data(), out_v, n, f, g_out);
  const double* b = layer.bias.values().data();
  for (std::size_t row = 0; row < n; ++row)
    kernels::active().accumulate(out_v + row * g_out, b, g_out);

  bool needs = input.grad_tracked() || layer.weight.grad_tracked() || layer.bias.grad_tracked();
  if (GradTape* tape = GradTape::current(); tape && needs) {
    tape->record(out, [ii = input.impl(), wi = layer.weight.impl(), bi = layer.bias.impl(),
                       oi = out.impl(), n, f, g_out] {
      const auto& kb = kernels::active();
      const double* g = oi->grad->data();
      if (ii->grad) kb.gemm_nt(g, wi->values->data(), ii->grad->data(), n, g_out, f);
      if (wi->grad) kb.gemm_tn(ii->values->data(), g, wi->grad->data(), f, n, g_out);
      if (bi->grad) {
        double* gb = bi->grad->data();
        for (std::size_t row = 0; row < n; ++row) kb.accumulate(gb, g + row * g_out, g_out);
      }
    });
  }
  return out;
}

Tensor log_softmax(const Tensor& input) {
  if (input.rank() != 2)
    fail(Errc::shape_mismatch, "log_softmax input must be [N,K], got " + shape_str(input.shape()));
  const std::size_t n = input.dim(0), k = input.dim(1);
  Tensor out = Tensor::zeros(input.shape());
  const double* in = input.values().data();
  double* out_v = out.values_mut().data();
  for (std::size_t row = 0; row < n; ++row) {
    const double* x = in + row * k;
    double* y = out_v + row * k;
    double m = *std::max_element(x, x + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(x[j] - m);
    double lse = m + std::log(s);
    for (std::size_t j = 0; j < k; ++j) y[j] = x[j] - lse;
  }

  if (GradTape* tape = GradTape::current(); tape && input.grad_tracked()) {
    tape->record(out, [ii = input.impl(), oi = out.impl(), n, k] {
      // dx = dy - softmax(x) * sum(dy) per row, with softmax = exp(y)
      double* gin = ii->grad->data();
      const double* g = oi->grad->data();
      const double* y = oi->values->data();
      for (std::size_t row = 0; row < n; ++row) {
        const double* gr = g + row * k;
        const double* yr = y + row * k;
        double* gi = gin + row * k;
        double total = kernels::active().reduce_sum(gr, k);
        for (std::size_t j = 0; j < k; ++j) gi[j] += gr[j] - std::exp(yr[j]) * total;
      }
    });
  }
  return out;
}

Tensor batchnorm(const Tensor& input, BatchNorm& layer, bool training) {
  if (input.rank() != 4)
    fail(Errc::shape_mismatch, "batchnorm input must be [N,C,H,W], got " + shape_str(input.shape()));
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  if (layer.gamma.numel() != c || layer.beta.numel() != c)
    fail(Errc::shape_mismatch, "batchnorm affine parameters must have " + std::to_string(c) + " channels");
  const std::size_t m = n * hw;  // elements per channel
  if (training && m < 2) fail(Errc::batch_too_small, "training-mode batchnorm needs N*H*W >= 2");

  const auto& kn = kernels::active();
  const double* in = input.values().data();
  const double* gamma = layer.gamma.values().data();
  const double* beta = layer.beta.values().data();
  const std::size_t chw = c * hw;

  std::vector<double> mean(c), inv_std(c);
  if (training) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double total = 0.0;
      for (std::size_t b = 0; b < n; ++b) total += kn.reduce_sum(in + b * chw + ch * hw, hw);
      mean[ch] = total / static_cast<double>(m);
      double sq = 0.0;
      for (std::size_t b = 0; b < n; ++b)
        sq += kn.reduce_centered_sumsq(in + b * chw + ch * hw, mean[ch], hw);
      double var = sq / static_cast<double>(m);
      inv_std[ch] = 1.0 / std::sqrt(var + layer.epsilon);
      double* rm = layer.running_mean.values_mut().data();
      double* rv = layer.running_var.values_mut().data();
      rm[ch] = (1.0 - layer.momentum) * rm[ch] + layer.momentum * mean[ch];
      rv[ch] = (1.0 - layer.momentum) * rv[ch] + layer.momentum * var;
    }
  } else {
    const double* rm = layer.running_mean.values().data();
    const double* rv = layer.running_var.values().data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = rm[ch];
      inv_std[ch] = 1.0 / std::sqrt(rv[ch] + layer.epsilon);
    }
  }

  Tensor out = Tensor::zeros(input.shape());
  double* out_v = out.values_mut().data();
  // Saved for the backward pass.
  auto xhat = std::make_shared<std::vector<double>>(input.numel());
  double* xh = xhat->data();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* src = in + b * chw + ch * hw;
      double* xrow = xh + b * chw + ch * hw;
      double* orow = out_v + b * chw + ch * hw;
      kn.sub_scalar(src, mean[ch], xrow, hw);
      kn.mul_scalar(xrow, inv_std[ch], xrow, hw);
      kn.mul_scalar(xrow, gamma[ch], orow, hw);
      kn.add_scalar(orow, beta[ch], orow, hw);
    }

  bool needs = input.grad_tracked() || layer.gamma.grad_tracked() || layer.beta.grad_tracked();
  if (GradTape* tape = GradTape::current(); tape && needs) {
    auto inv_std_saved = std::make_shared<std::vector<double>>(inv_std);
    tape->record(out, [ii = input.impl(), gi = layer.gamma.impl(), bi = layer.beta.impl(),
                       oi = out.impl(), xhat, inv_std_saved, training, n, c, hw] {
      const auto& kb = kernels::active();
      const std::size_t chw = c * hw;
      const double m = static_cast<double>(n * hw);
      const double* g = oi->grad->data();
      const double* xh = xhat->data();
      const double* gamma = gi->values->data();
      for (std::size_t ch = 0; ch < c; ++ch) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
          const double* grow = g + b * chw + ch * hw;
          const double* xrow = xh + b * chw + ch * hw;
          sum_g += kb.reduce_sum(grow, hw);
          sum_gx += kb.dot(grow, xrow, hw);
        }
        if (gi->grad) gi->grad->data()[ch] += sum_gx;
        if (bi->grad) bi->grad->data()[ch] += sum_g;
        if (ii->grad) {
          double istd = (*inv_std_saved)[ch];
          double gch = gamma[ch];
          double* gin = ii->grad->data();
          if (training) {
            // dx = gamma*istd * (dy - mean(dy) - xhat*mean(dy*xhat))
            double mean_g = sum_g / m;
            double mean_gx = sum_gx / m;
            for (std::size_t b = 0; b < n; ++b) {
              const double* grow = g + b * chw + ch * hw;
              const double* xrow = xh + b * chw + ch * hw;
              double* irow = gin + b * chw + ch * hw;
              for (std::size_t i = 0; i < hw; ++i)
                irow[i] += gch * istd * (grow[i] - mean_g - xrow[i] * mean_gx);
            }
          } else {
            for (std::size_t b = 0; b < n; ++b) {
              const double* grow = g + b * chw + ch * hw;
              double* irow = gin + b * chw + ch * hw;
              kb.axpy(irow, gch * istd, grow, hw);
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor residual_block(const Tensor& input, BasicBlock& block, bool training) {
  Tensor branch = conv2d(input, block.conv1);
  branch = batchnorm(branch, block.bn1, training);
  branch = relu(branch);
  branch = conv2d(branch, block.conv2);
  branch = batchnorm(branch, block.bn2, training);

  Tensor shortcut = input;
  if (block.downsample) {
    shortcut = conv2d(input, block.downsample->conv);
    shortcut = batchnorm(shortcut, block.downsample->bn, training);
  }
  if (branch.shape() != shortcut.shape())
    fail(Errc::shape_mismatch, "residual branch " + shape_str(branch.shape()) +
                                   " does not match shortcut " + shape_str(shortcut.shape()));
  return relu(add(branch, shortcut));
}

}  // namespace binbrain
