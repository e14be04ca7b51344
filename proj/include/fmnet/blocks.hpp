#pragma once

#include <string>
#include <vector>

#include "fmnet/conv.hpp"

namespace fmnet {

// Function-mixture block layout: an entry conv block feeding n basis subnets
// (m conv blocks each, kernel size per basis) and one mixing subnet emitting
// per-pixel simplex weights over the basis outputs.
struct FmBlockSpec {
  int in_channels = 0;   // entry conv input
  int n = 0;             // number of basis functions
  int m = 0;             // conv blocks per subnet
  int c = 0;             // working channel count
  std::vector<int> kernels;  // one odd kernel size per basis
  int out_channels = 0;  // c for interior blocks, band count for the final block
};

inline void validate(const FmBlockSpec& spec, const std::string& where) {
  if (spec.n < 1) throw ConfigError(where + ": n must be >= 1");
  if (spec.m < 1) throw ConfigError(where + ": m must be >= 1");
  if (spec.c < 1 || spec.in_channels < 1 || spec.out_channels < 1) {
    throw ConfigError(where + ": channel counts must be positive");
  }
  if (static_cast<int>(spec.kernels.size()) != spec.n) {
    throw ConfigError(where + ": kernel list has " + std::to_string(spec.kernels.size()) +
                      " entries, expected n=" + std::to_string(spec.n));
  }
  for (int k : spec.kernels) {
    if (k < 1 || k % 2 == 0) {
      throw ConfigError(where + ": basis kernel sizes must be odd and positive");
    }
  }
}

inline ConvBlockSpec entry_conv_spec(const FmBlockSpec& spec) {
  return ConvBlockSpec{spec.in_channels, spec.c, 3, true};
}

inline ConvBlockSpec basis_conv_spec(const FmBlockSpec& spec, int basis, int layer) {
  const bool last = layer == spec.m - 1;
  return ConvBlockSpec{spec.c, last ? spec.out_channels : spec.c, spec.kernels[basis], true};
}

// Mixing subnet: m-1 ReLU conv blocks (3x3, c->c) and a final 3x3 projection
// to n channels with no ReLU; the softmax comes after.
inline ConvBlockSpec mixing_conv_spec(const FmBlockSpec& spec, int layer) {
  const bool proj = layer == spec.m - 1;
  return ConvBlockSpec{spec.c, proj ? spec.n : spec.c, 3, !proj};
}

inline std::string basis_prefix(const std::string& block, int basis) {
  return block + ".basis" + std::to_string(basis + 1);
}

inline std::string basis_conv_prefix(const std::string& block, int basis, int layer) {
  return basis_prefix(block, basis) + ".conv" + std::to_string(layer + 1);
}

inline std::string mixing_conv_prefix(const std::string& block, int layer, int m) {
  if (layer == m - 1) return block + ".mix.proj";
  return block + ".mix.conv" + std::to_string(layer + 1);
}

template <typename T>
void init_fm_block_params(ParameterSet<T>& params, const std::string& block, const FmBlockSpec& spec,
                          RandomEngine& rng) {
  validate(spec, block);
  init_conv_params(params, block + ".entry", entry_conv_spec(spec), rng);
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.m; ++j) {
      init_conv_params(params, basis_conv_prefix(block, i, j), basis_conv_spec(spec, i, j), rng);
    }
  }
  for (int j = 0; j < spec.m; ++j) {
    init_conv_params(params, mixing_conv_prefix(block, j, spec.m), mixing_conv_spec(spec, j), rng);
  }
}

template <typename T>
struct StackCache {
  std::vector<ConvCache<T>> convs;
};

// One basis function f_i: m consecutive conv blocks sharing the basis kernel
// size. The last block maps to out_channels, earlier ones stay at c.
template <typename T>
FeatureMap<T> basis_function_forward(const FeatureMap<T>& features, const FmBlockSpec& spec, int basis,
                                     const ParameterSet<T>& params, const std::string& block,
                                     StackCache<T>* cache = nullptr) {
  validate(spec, block);
  if (cache) cache->convs.resize(spec.m);
  FeatureMap<T> x = features;
  for (int j = 0; j < spec.m; ++j) {
    x = conv_block_forward(x, basis_conv_spec(spec, basis, j), params, basis_conv_prefix(block, basis, j),
                           cache ? &cache->convs[j] : nullptr);
  }
  return x;
}

template <typename T>
FeatureMap<T> basis_function_backward(const FeatureMap<T>& grad_out, const StackCache<T>& cache,
                                      const FmBlockSpec& spec, int basis, const ParameterSet<T>& params,
                                      const std::string& block, ParameterSet<T>& grads) {
  FeatureMap<T> g = grad_out;
  for (int j = spec.m - 1; j >= 0; --j) {
    g = conv_block_backward(g, cache.convs[j], params, basis_conv_prefix(block, basis, j), grads);
  }
  return g;
}

// Numerically stable per-pixel softmax over the rows of an n x pixels matrix.
template <typename T>
MatrixX<T> softmax_columns(const MatrixX<T>& logits) {
  MatrixX<T> w(logits.rows(), logits.cols());
  for (Eigen::Index p = 0; p < logits.cols(); ++p) {
    const T mx = logits.col(p).maxCoeff();
    VectorX<T> e = (logits.col(p).array() - mx).exp();
    w.col(p) = e / e.sum();
  }
  return w;
}

template <typename T>
struct MixingCache {
  StackCache<T> stack;
  MatrixX<T> weights;  // softmax output, n x pixels
};

// Mixing function w(x): m-1 ReLU conv blocks, an n-channel linear projection,
// then a per-pixel softmax so the weights land on the simplex.
template <typename T>
MixWeightMaps<T> mixing_function_forward(const FeatureMap<T>& features, const FmBlockSpec& spec,
                                         const ParameterSet<T>& params, const std::string& block,
                                         MixingCache<T>* cache = nullptr) {
  validate(spec, block);
  if (cache) cache->stack.convs.resize(spec.m);
  FeatureMap<T> x = features;
  for (int j = 0; j < spec.m; ++j) {
    x = conv_block_forward(x, mixing_conv_spec(spec, j), params, mixing_conv_prefix(block, j, spec.m),
                           cache ? &cache->stack.convs[j] : nullptr);
  }
  MixWeightMaps<T> maps(spec.n, features.height, features.width);
  maps.values = softmax_columns(x.values);
  if (cache) cache->weights = maps.values;
  return maps;
}

template <typename T>
FeatureMap<T> mixing_function_backward(const MatrixX<T>& grad_weights, const MixingCache<T>& cache,
                                       const FmBlockSpec& spec, const ParameterSet<T>& params,
                                       const std::string& block, ParameterSet<T>& grads) {
  // softmax backward per pixel: dl = w .* (dw - sum_i dw_i w_i)
  const MatrixX<T>& w = cache.weights;
  MatrixX<T> dlogits(w.rows(), w.cols());
  Eigen::Matrix<T, 1, Eigen::Dynamic> s = (grad_weights.array() * w.array()).colwise().sum();
  dlogits = w.array() * (grad_weights.array().rowwise() - s.array());

  FeatureMap<T> g;
  g.channels = spec.n;
  g.height = cache.stack.convs.back().in_height;
  g.width = cache.stack.convs.back().in_width;
  g.values = std::move(dlogits);
  for (int j = spec.m - 1; j >= 0; --j) {
    g = conv_block_backward(g, cache.stack.convs[j], params, mixing_conv_prefix(block, j, spec.m), grads);
  }
  return g;
}

template <typename T>
struct FmBlockCache {
  bool valid = false;
  ConvCache<T> entry;
  FeatureMap<T> shared;                     // entry conv output, input of every subnet
  std::vector<StackCache<T>> basis;         // n entries
  std::vector<FeatureMap<T>> basis_outputs; // n entries, out_channels x H x W
  MixingCache<T> mixing;
  bool mix_enabled = true;
};

// Function-mixture block: shared entry conv, n basis functions, pixel-wise
// convex mixture of their outputs. Each weight plane broadcasts across all
// output channels of its basis. With mix_enabled=false the weights are the
// constant 1/n and the mixing subnet is not evaluated.
template <typename T>
std::pair<FeatureMap<T>, MixWeightMaps<T>> fm_block_forward(const FeatureMap<T>& x, const FmBlockSpec& spec,
                                                            const ParameterSet<T>& params,
                                                            const std::string& block,
                                                            bool mix_enabled = true,
                                                            FmBlockCache<T>* cache = nullptr) {
  validate(spec, block);
  if (cache) {
    cache->valid = true;
    cache->basis.resize(spec.n);
    cache->basis_outputs.resize(spec.n);
    cache->mix_enabled = mix_enabled;
  }
  FeatureMap<T> shared =
      conv_block_forward(x, entry_conv_spec(spec), params, block + ".entry", cache ? &cache->entry : nullptr);

  MixWeightMaps<T> weights(spec.n, shared.height, shared.width);
  if (mix_enabled) {
    weights = mixing_function_forward(shared, spec, params, block, cache ? &cache->mixing : nullptr);
  } else {
    weights.values.setConstant(T(1) / static_cast<T>(spec.n));
  }

  FeatureMap<T> out(spec.out_channels, shared.height, shared.width);
  for (int i = 0; i < spec.n; ++i) {
    FeatureMap<T> fi =
        basis_function_forward(shared, spec, i, params, block, cache ? &cache->basis[i] : nullptr);
    out.values.array() += fi.values.array().rowwise() * weights.values.row(i).array();
    if (cache) cache->basis_outputs[i] = std::move(fi);
  }
  if (cache) cache->shared = std::move(shared);
  return {std::move(out), std::move(weights)};
}

template <typename T>
FeatureMap<T> fm_block_backward(const FeatureMap<T>& grad_out, const FmBlockCache<T>& cache,
                                const FmBlockSpec& spec, const ParameterSet<T>& params,
                                const std::string& block, ParameterSet<T>& grads) {
  if (!cache.valid) {
    throw UsageError(block + ": backward called before forward");
  }
  FeatureMap<T> dshared(spec.c, cache.shared.height, cache.shared.width);

  MatrixX<T> dweights;
  if (cache.mix_enabled) dweights.setZero(spec.n, grad_out.pixels());

  for (int i = 0; i < spec.n; ++i) {
    const MatrixX<T>& fi = cache.basis_outputs[i].values;
    FeatureMap<T> dfi(spec.out_channels, grad_out.height, grad_out.width);
    if (cache.mix_enabled) {
      dweights.row(i) = (grad_out.values.array() * fi.array()).colwise().sum();
      dfi.values = grad_out.values.array().rowwise() * cache.mixing.weights.row(i).array();
    } else {
      dfi.values = grad_out.values * (T(1) / static_cast<T>(spec.n));
    }
    FeatureMap<T> g = basis_function_backward(dfi, cache.basis[i], spec, i, params, block, grads);
    dshared.values += g.values;
  }
  if (cache.mix_enabled) {
    FeatureMap<T> g = mixing_function_backward(dweights, cache.mixing, spec, params, block, grads);
    dshared.values += g.values;
  }
  return conv_block_backward(dshared, cache.entry, params, block + ".entry", grads);
}

}  // namespace fmnet
