#pragma once

#include <string>

#include "fmnet/params.hpp"
#include "fmnet/random.hpp"
#include "fmnet/tensor.hpp"

namespace fmnet {

// One convolutional block: stride-1 same-padding convolution with bias,
// optionally followed by ReLU.
struct ConvBlockSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel_size = 3;  // odd
  bool apply_relu = true;
};

inline void validate(const ConvBlockSpec& spec, const std::string& where) {
  if (spec.in_channels < 1 || spec.out_channels < 1) {
    throw ConfigError(where + ": channel counts must be positive");
  }
  if (spec.kernel_size < 1 || spec.kernel_size % 2 == 0) {
    throw ConfigError(where + ": kernel size must be odd and positive, got " +
                      std::to_string(spec.kernel_size));
  }
}

// He-normal kernels (variance 2/fan-in), zero biases.
template <typename T>
void init_conv_params(ParameterSet<T>& params, const std::string& prefix, const ConvBlockSpec& spec,
                      RandomEngine& rng) {
  validate(spec, prefix);
  const int k = spec.kernel_size;
  auto& w = params.add(prefix + ".weight", {spec.out_channels, spec.in_channels, k, k});
  const double stddev = std::sqrt(2.0 / (static_cast<double>(spec.in_channels) * k * k));
  for (Eigen::Index i = 0; i < w.data.size(); ++i) {
    w.data[i] = static_cast<T>(rng.normal() * stddev);
  }
  params.add(prefix + ".bias", {spec.out_channels});
}

// Forward-pass record needed by the backward pass.
template <typename T>
struct ConvCache {
  bool valid = false;
  ConvBlockSpec spec;
  int in_height = 0, in_width = 0;
  MatrixX<T> cols;    // (in_c*k*k) x pixels patch matrix
  MatrixX<T> output;  // post-activation, for the ReLU mask
};

// Patch matrix for stride-1 zero-padded convolution. Row index is
// ic*k*k + ky*k + kx; column index is the output pixel.
template <typename T>
MatrixX<T> im2col(const FeatureMap<T>& in, int k) {
  const int pad = (k - 1) / 2;
  const int H = in.height, W = in.width, C = in.channels;
  MatrixX<T> cols = MatrixX<T>::Zero(static_cast<Eigen::Index>(C) * k * k, in.pixels());
  for (int h = 0; h < H; ++h) {
    for (int w = 0; w < W; ++w) {
      const Eigen::Index p = static_cast<Eigen::Index>(h) * W + w;
      for (int ky = 0; ky < k; ++ky) {
        const int hy = h + ky - pad;
        if (hy < 0 || hy >= H) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int wx = w + kx - pad;
          if (wx < 0 || wx >= W) continue;
          const Eigen::Index q = static_cast<Eigen::Index>(hy) * W + wx;
          for (int ic = 0; ic < C; ++ic) {
            cols(static_cast<Eigen::Index>(ic) * k * k + ky * k + kx, p) = in.values(ic, q);
          }
        }
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatter-add patch-matrix gradients back onto the input.
template <typename T>
void col2im_accumulate(const MatrixX<T>& dcols, int k, FeatureMap<T>& dinput) {
  const int pad = (k - 1) / 2;
  const int H = dinput.height, W = dinput.width, C = dinput.channels;
  for (int h = 0; h < H; ++h) {
    for (int w = 0; w < W; ++w) {
      const Eigen::Index p = static_cast<Eigen::Index>(h) * W + w;
      for (int ky = 0; ky < k; ++ky) {
        const int hy = h + ky - pad;
        if (hy < 0 || hy >= H) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int wx = w + kx - pad;
          if (wx < 0 || wx >= W) continue;
          const Eigen::Index q = static_cast<Eigen::Index>(hy) * W + wx;
          for (int ic = 0; ic < C; ++ic) {
            dinput.values(ic, q) += dcols(static_cast<Eigen::Index>(ic) * k * k + ky * k + kx, p);
          }
        }
      }
    }
  }
}

// Convolution + bias (+ ReLU). Spatial size is preserved. Parameters live at
// `prefix`.weight (out_c x in_c x k x k) and `prefix`.bias (out_c).
template <typename T>
FeatureMap<T> conv_block_forward(const FeatureMap<T>& input, const ConvBlockSpec& spec,
                                 const ParameterSet<T>& params, const std::string& prefix,
                                 ConvCache<T>* cache = nullptr) {
  validate(spec, prefix);
  if (input.channels != spec.in_channels) {
    throw ConfigError(prefix + ": input has " + std::to_string(input.channels) +
                      " channels, spec expects " + std::to_string(spec.in_channels));
  }
  const int k = spec.kernel_size;
  const auto& w = expect_array(params, prefix + ".weight", {spec.out_channels, spec.in_channels, k, k});
  const auto& b = expect_array(params, prefix + ".bias", {spec.out_channels});

  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> kernel(
      w.data.data(), spec.out_channels, static_cast<Eigen::Index>(spec.in_channels) * k * k);

  FeatureMap<T> out(spec.out_channels, input.height, input.width);
  MatrixX<T> cols = im2col(input, k);
  out.values.noalias() = kernel * cols;
  out.values.colwise() += b.data;
  if (spec.apply_relu) {
    out.values = out.values.cwiseMax(T(0));
  }
  if (cache) {
    cache->valid = true;
    cache->spec = spec;
    cache->in_height = input.height;
    cache->in_width = input.width;
    cache->cols = std::move(cols);
    cache->output = out.values;
  }
  return out;
}

// Accumulates parameter gradients into `grads` and returns the gradient with
// respect to the block input.
template <typename T>
FeatureMap<T> conv_block_backward(const FeatureMap<T>& grad_out, const ConvCache<T>& cache,
                                  const ParameterSet<T>& params, const std::string& prefix,
                                  ParameterSet<T>& grads) {
  if (!cache.valid) {
    throw UsageError(prefix + ": backward called before forward");
  }
  const ConvBlockSpec& spec = cache.spec;
  const int k = spec.kernel_size;
  if (grad_out.channels != spec.out_channels || grad_out.height != cache.in_height ||
      grad_out.width != cache.in_width) {
    throw ConfigError(prefix + ": gradient shape does not match the recorded forward pass");
  }

  MatrixX<T> dpre;
  if (spec.apply_relu) {
    dpre = (cache.output.array() > T(0)).template cast<T>() * grad_out.values.array();
  } else {
    dpre = grad_out.values;
  }

  auto& dw = grads.at(prefix + ".weight");
  auto& db = grads.at(prefix + ".bias");
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> dkernel(
      dw.data.data(), spec.out_channels, static_cast<Eigen::Index>(spec.in_channels) * k * k);
  dkernel.noalias() += dpre * cache.cols.transpose();
  db.data += dpre.rowwise().sum();

  const auto& w = params.at(prefix + ".weight");
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> kernel(
      w.data.data(), spec.out_channels, static_cast<Eigen::Index>(spec.in_channels) * k * k);
  MatrixX<T> dcols = kernel.transpose() * dpre;

  FeatureMap<T> dinput(spec.in_channels, cache.in_height, cache.in_width);
  col2im_accumulate(dcols, k, dinput);
  return dinput;
}

}  // namespace fmnet
