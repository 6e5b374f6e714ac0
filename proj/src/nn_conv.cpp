#include <cstring>
#include <vector>

#include "binbrain/autodiff.hpp"
#include "binbrain/errors.hpp"
#include "binbrain/kernels.hpp"
#include "binbrain/nn.hpp"

namespace binbrain {

namespace {

struct ConvDims {
  std::size_t batch, in_c, in_h, in_w;
  std::size_t out_c, kh, kw;
  std::size_t stride, pad;
  std::size_t out_h, out_w;
  std::size_t cols_rows() const { return in_c * kh * kw; }
  std::size_t cols_cols() const { return out_h * out_w; }
};

ConvDims conv_dims(const Tensor& input, const Conv2d& layer) {
  if (input.rank() != 4)
    fail(Errc::shape_mismatch, "conv2d input must be [N,C,H,W], got " + shape_str(input.shape()));
  if (layer.weight.rank() != 4)
    fail(Errc::shape_mismatch, "conv2d kernel must be [outC,inC,kh,kw], got " + shape_str(layer.weight.shape()));
  ConvDims d;
  d.batch = input.dim(0);
  d.in_c = input.dim(1);
  d.in_h = input.dim(2);
  d.in_w = input.dim(3);
  d.out_c = layer.weight.dim(0);
  d.kh = layer.weight.dim(2);
  d.kw = layer.weight.dim(3);
  d.stride = static_cast<std::size_t>(layer.stride);
  d.pad = static_cast<std::size_t>(layer.padding);
  if (layer.weight.dim(1) != d.in_c)
    fail(Errc::shape_mismatch, "conv2d kernel expects " + std::to_string(layer.weight.dim(1)) +
                                   " input channels, input has " + std::to_string(d.in_c));
  if (layer.stride < 1) fail(Errc::invalid_config, "conv2d stride must be >= 1");
  if (layer.padding < 0) fail(Errc::invalid_config, "conv2d padding must be >= 0");
  std::ptrdiff_t oh = (static_cast<std::ptrdiff_t>(d.in_h) + 2 * layer.padding - static_cast<std::ptrdiff_t>(d.kh)) / layer.stride + 1;
  std::ptrdiff_t ow = (static_cast<std::ptrdiff_t>(d.in_w) + 2 * layer.padding - static_cast<std::ptrdiff_t>(d.kw)) / layer.stride + 1;
  if (oh < 1 || ow < 1)
    fail(Errc::empty_output, "conv2d output would be empty for input " + shape_str(input.shape()));
  d.out_h = static_cast<std::size_t>(oh);
  d.out_w = static_cast<std::size_t>(ow);
  if (layer.bias.defined() && (layer.bias.rank() != 1 || layer.bias.dim(0) != d.out_c))
    fail(Errc::shape_mismatch, "conv2d bias must be [outC]");
  return d;
}

// Gathers one sample's receptive fields: img [C,H,W] -> cols [C*kh*kw, outH*outW].
// Out-of-image taps read as zero.
void im2col(const double* img, const ConvDims& d, double* cols) {
  const std::size_t hw = d.in_h * d.in_w;
  const std::size_t out_hw = d.cols_cols();
  std::size_t row = 0;
  for (std::size_t c = 0; c < d.in_c; ++c) {
    const double* plane = img + c * hw;
    for (std::size_t ky = 0; ky < d.kh; ++ky) {
      for (std::size_t kx = 0; kx < d.kw; ++kx, ++row) {
        double* out_row = cols + row * out_hw;
        for (std::size_t oy = 0; oy < d.out_h; ++oy) {
          std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * d.stride + ky) - static_cast<std::ptrdiff_t>(d.pad);
          double* dst = out_row + oy * d.out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.in_h)) {
            std::memset(dst, 0, d.out_w * sizeof(double));
            continue;
          }
          const double* src_row = plane + static_cast<std::size_t>(iy) * d.in_w;
          for (std::size_t ox = 0; ox < d.out_w; ++ox) {
            std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * d.stride + kx) - static_cast<std::ptrdiff_t>(d.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.in_w)) ? 0.0 : src_row[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

// Scatter-add inverse of im2col; accumulates into img.
void col2im(const double* cols, const ConvDims& d, double* img) {
  const std::size_t hw = d.in_h * d.in_w;
  const std::size_t out_hw = d.cols_cols();
  std::size_t row = 0;
  for (std::size_t c = 0; c < d.in_c; ++c) {
    double* plane = img + c * hw;
    for (std::size_t ky = 0; ky < d.kh; ++ky) {
      for (std::size_t kx = 0; kx < d.kw; ++kx, ++row) {
        const double* src_row = cols + row * out_hw;
        for (std::size_t oy = 0; oy < d.out_h; ++oy) {
          std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * d.stride + ky) - static_cast<std::ptrdiff_t>(d.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.in_h)) continue;
          double* dst_row = plane + static_cast<std::size_t>(iy) * d.in_w;
          const double* src = src_row + oy * d.out_w;
          for (std::size_t ox = 0; ox < d.out_w; ++ox) {
            std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * d.stride + kx) - static_cast<std::ptrdiff_t>(d.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.in_w)) continue;
            dst_row[static_cast<std::size_t>(ix)] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Conv2d& layer) {
  ConvDims d = conv_dims(input, layer);
  const auto& kn = kernels::active();

  Tensor out = Tensor::zeros({d.batch, d.out_c, d.out_h, d.out_w});
  const std::size_t cols_rows = d.cols_rows();
  const std::size_t out_hw = d.cols_cols();
  const std::size_t in_size = d.in_c * d.in_h * d.in_w;
  const std::size_t out_size = d.out_c * out_hw;

  std::vector<double> cols(cols_rows * out_hw);
  const double* w = layer.weight.values().data();  // viewed [outC, cols_rows]
  const double* in = input.values().data();
  double* out_v = out.values_mut().data();

  for (std::size_t n = 0; n < d.batch; ++n) {
    im2col(in + n * in_size, d, cols.data());
    kn.gemm_nn(w, cols.data(), out_v + n * out_size, d.out_c, cols_rows, out_hw);
  }
  if (layer.bias.defined()) {
    const double* b = layer.bias.values().data();
    for (std::size_t n = 0; n < d.batch; ++n)
      for (std::size_t oc = 0; oc < d.out_c; ++oc) {
        double* row = out_v + n * out_size + oc * out_hw;
        kn.add_scalar(row, b[oc], row, out_hw);
      }
  }

  bool needs_grad = input.grad_tracked() || layer.weight.grad_tracked() ||
                    (layer.bias.defined() && layer.bias.grad_tracked());
  if (GradTape* tape = GradTape::current(); tape && needs_grad) {
    auto ii = input.impl();
    auto wi = layer.weight.impl();
    auto bi = layer.bias.defined() ? layer.bias.impl() : nullptr;
    auto oi = out.impl();
    tape->record(out, [ii, wi, bi, oi, d] {
      const auto& kb = kernels::active();
      const std::size_t cols_rows = d.cols_rows();
      const std::size_t out_hw = d.cols_cols();
      const std::size_t in_size = d.in_c * d.in_h * d.in_w;
      const std::size_t out_size = d.out_c * out_hw;
      const double* g = oi->grad->data();

      if (bi && bi->grad) {
        double* gb = bi->grad->data();
        for (std::size_t n = 0; n < d.batch; ++n)
          for (std::size_t oc = 0; oc < d.out_c; ++oc)
            gb[oc] += kb.reduce_sum(g + n * out_size + oc * out_hw, out_hw);
      }

      const bool want_w = wi->grad != nullptr;
      const bool want_in = ii->grad != nullptr;
      if (!want_w && !want_in) return;

      std::vector<double> cols(cols_rows * out_hw);
      std::vector<double> gcols(want_in ? cols_rows * out_hw : 0);
      const double* in = ii->values->data();
      const double* w = wi->values->data();
      for (std::size_t n = 0; n < d.batch; ++n) {
        const double* gout = g + n * out_size;
        if (want_w) {
          im2col(in + n * in_size, d, cols.data());
          // dW[outC, cols_rows] += G[outC, out_hw] * cols^T
          kb.gemm_nt(gout, cols.data(), wi->grad->data(), d.out_c, out_hw, cols_rows);
        }
        if (want_in) {
          std::fill(gcols.begin(), gcols.end(), 0.0);
          // dcols[cols_rows, out_hw] += W^T * G
          kb.gemm_tn(w, gout, gcols.data(), cols_rows, d.out_c, out_hw);
          col2im(gcols.data(), d, ii->grad->data() + n * in_size);
        }
      }
    });
  }
  return out;
}

}  // namespace binbrain
