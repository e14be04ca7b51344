#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "fmnet/blocks.hpp"

namespace fmnet {

// Channel-to-wavelength assignment for spectral upsampling: anchor j (in
// band order, low wavelength first) reads input channel order[j]. The default
// puts blue at band 0 and red at band B-1.
using ChannelOrder = std::array<int, 3>;
inline constexpr ChannelOrder kDefaultChannelOrder{2, 1, 0};

struct NetworkConfig {
  int p = 3;                          // stacked FM blocks, excluding the fusion block
  int n = 3;                          // basis functions per block
  int m = 2;                          // conv blocks per subnet
  int c = 64;                         // working channels
  std::vector<int> kernels{3, 7, 11}; // one per basis
  int bands = 31;                     // output spectral bands B
  bool fusion_enabled = true;         // intermediate feature fusion via F_c
  bool mix_enabled = true;            // pixel-wise mixture (false: constant 1/n)
  ChannelOrder channel_order = kDefaultChannelOrder;
};

inline void validate(const NetworkConfig& cfg) {
  if (cfg.p < 1) throw ConfigError("network: p must be >= 1");
  if (cfg.bands < 1) throw ConfigError("network: bands must be >= 1");
  if (cfg.n < 1) throw ConfigError("network: n must be >= 1");
  if (cfg.m < 1) throw ConfigError("network: m must be >= 1");
  if (cfg.c < 1) throw ConfigError("network: c must be >= 1");
  if (static_cast<int>(cfg.kernels.size()) != cfg.n) {
    throw ConfigError("network: kernel list has " + std::to_string(cfg.kernels.size()) +
                      " entries, expected n=" + std::to_string(cfg.n));
  }
  for (int k : cfg.kernels) {
    if (k < 1 || k % 2 == 0) throw ConfigError("network: kernel sizes must be odd and positive");
  }
  if (cfg.fusion_enabled && cfg.p < 2) {
    throw ConfigError("network: fusion requires p >= 2 (the fusion block consumes interior outputs)");
  }
  bool seen[3] = {false, false, false};
  for (int ch : cfg.channel_order) {
    if (ch < 0 || ch > 2 || seen[ch]) throw ConfigError("network: channel_order must be a permutation of 0,1,2");
    seen[ch] = true;
  }
}

inline int max_kernel(const NetworkConfig& cfg) {
  int mx = 3;
  for (int k : cfg.kernels) mx = std::max(mx, k);
  return mx;
}

// Execution-ordered FM block names: interior blocks, the fusion block when
// enabled, then the output block.
inline std::vector<std::string> fm_block_names(const NetworkConfig& cfg) {
  std::vector<std::string> names;
  for (int u = 1; u < cfg.p; ++u) names.push_back("f" + std::to_string(u));
  if (cfg.fusion_enabled) names.push_back("fc");
  names.push_back("f" + std::to_string(cfg.p));
  return names;
}

inline FmBlockSpec fm_block_spec(const NetworkConfig& cfg, const std::string& name) {
  FmBlockSpec spec;
  spec.n = cfg.n;
  spec.m = cfg.m;
  spec.c = cfg.c;
  spec.kernels = cfg.kernels;
  spec.in_channels = cfg.c;
  spec.out_channels = cfg.c;
  if (name == "fc") {
    spec.in_channels = (cfg.p - 1) * cfg.c;
  } else if (name == "f" + std::to_string(cfg.p)) {
    spec.out_channels = cfg.bands;
  }
  return spec;
}

template <typename T>
struct Network {
  NetworkConfig config;
  ParameterSet<T> params;

  template <typename U>
  Network<U> cast() const {
    return Network<U>{config, params.template cast<U>()};
  }
};

// Deterministic construction: the entry conv block G0 (bands -> c) followed
// by the FM blocks in execution order, all parameters drawn from one seeded
// stream in a fixed order.
template <typename T = float>
Network<T> build_network(const NetworkConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  Network<T> net;
  net.config = cfg;
  RandomEngine rng(mix_seed(seed));
  init_conv_params(net.params, "g0", ConvBlockSpec{cfg.bands, cfg.c, 3, true}, rng);
  for (const std::string& name : fm_block_names(cfg)) {
    init_fm_block_params(net.params, name, fm_block_spec(cfg, name), rng);
  }
  return net;
}

// Places the three input channels at fractional band positions 0, (B-1)/2 and
// B-1 along the wavelength axis and linearly interpolates every band between
// its two nearest anchors. Anchors are reproduced exactly.
template <typename T>
FeatureMap<T> spectral_upsample(const FeatureMap<T>& rgb, int bands,
                                const ChannelOrder& order = kDefaultChannelOrder) {
  if (rgb.channels != 3) {
    throw ConfigError("spectral_upsample: expected 3 channels, got " + std::to_string(rgb.channels));
  }
  if (bands < 1) throw ConfigError("spectral_upsample: bands must be >= 1");

  FeatureMap<T> out(bands, rgb.height, rgb.width);
  const auto v0 = rgb.values.row(order[0]);
  const auto v1 = rgb.values.row(order[1]);
  const auto v2 = rgb.values.row(order[2]);
  if (bands == 1) {
    // All three anchors coincide at band 0; keep the mid-wavelength anchor.
    out.values.row(0) = v1;
    return out;
  }
  const double q1 = (bands - 1) / 2.0;
  const double q2 = bands - 1.0;
  for (int b = 0; b < bands; ++b) {
    if (b <= q1) {
      const T f = static_cast<T>(b / q1);
      out.values.row(b) = (T(1) - f) * v0 + f * v1;
    } else {
      const T f = static_cast<T>((b - q1) / (q2 - q1));
      out.values.row(b) = (T(1) - f) * v1 + f * v2;
    }
  }
  return out;
}

template <typename T>
struct NetForwardCache {
  bool valid = false;
  FeatureMap<T> upsampled;
  ConvCache<T> g0;
  std::vector<FmBlockCache<T>> blocks;  // execution order
};

// Full forward pass: spectral upsampling, G0, the FM block stack with
// optional intermediate feature fusion, and the global residual. Returns the
// predicted cube and the weight maps of every FM block in execution order.
template <typename T>
std::pair<FeatureMap<T>, std::vector<MixWeightMaps<T>>> forward(const Network<T>& net,
                                                                const FeatureMap<T>& rgb,
                                                                NetForwardCache<T>* cache = nullptr) {
  const NetworkConfig& cfg = net.config;
  validate(cfg);
  if (rgb.channels != 3) {
    throw ConfigError("forward: expected a 3-channel input, got " + std::to_string(rgb.channels));
  }
  if (rgb.height < max_kernel(cfg) || rgb.width < max_kernel(cfg)) {
    throw DataError("forward: input " + std::to_string(rgb.height) + "x" + std::to_string(rgb.width) +
                    " is smaller than the largest kernel (" + std::to_string(max_kernel(cfg)) + ")");
  }

  const std::vector<std::string> names = fm_block_names(cfg);
  if (cache) {
    cache->valid = true;
    cache->blocks.resize(names.size());
  }
  std::vector<MixWeightMaps<T>> weight_maps;
  weight_maps.reserve(names.size());

  FeatureMap<T> upsampled = spectral_upsample(rgb, cfg.bands, cfg.channel_order);
  FeatureMap<T> x = conv_block_forward(upsampled, ConvBlockSpec{cfg.bands, cfg.c, 3, true}, net.params, "g0",
                                       cache ? &cache->g0 : nullptr);

  std::vector<FeatureMap<T>> interior;  // outputs of f1..f{p-1}, needed for fusion
  std::size_t bi = 0;
  for (int u = 1; u < cfg.p; ++u, ++bi) {
    auto [out, w] = fm_block_forward(x, fm_block_spec(cfg, names[bi]), net.params, names[bi],
                                     cfg.mix_enabled, cache ? &cache->blocks[bi] : nullptr);
    weight_maps.push_back(std::move(w));
    x = std::move(out);
    if (cfg.fusion_enabled) interior.push_back(x);
  }

  if (cfg.fusion_enabled) {
    // Eq-style concatenation order: latest interior output first.
    FeatureMap<T> concat((cfg.p - 1) * cfg.c, x.height, x.width);
    for (int i = 0; i < cfg.p - 1; ++i) {
      concat.values.middleRows(static_cast<Eigen::Index>(i) * cfg.c, cfg.c) =
          interior[interior.size() - 1 - i].values;
    }
    auto [out, w] = fm_block_forward(concat, fm_block_spec(cfg, "fc"), net.params, "fc", cfg.mix_enabled,
                                     cache ? &cache->blocks[bi] : nullptr);
    weight_maps.push_back(std::move(w));
    x = std::move(out);
    ++bi;
  }

  auto [out, w] = fm_block_forward(x, fm_block_spec(cfg, names.back()), net.params, names.back(),
                                   cfg.mix_enabled, cache ? &cache->blocks[bi] : nullptr);
  weight_maps.push_back(std::move(w));

  FeatureMap<T> prediction(cfg.bands, rgb.height, rgb.width);
  prediction.values = upsampled.values + out.values;
  if (cache) cache->upsampled = std::move(upsampled);
  return {std::move(prediction), std::move(weight_maps)};
}

// Backpropagates d(loss)/d(prediction) through the recorded forward pass,
// accumulating into `grads`. Returns the gradient with respect to the
// spectrally upsampled input (residual term included).
template <typename T>
FeatureMap<T> backward(const Network<T>& net, const NetForwardCache<T>& cache,
                       const FeatureMap<T>& grad_prediction, ParameterSet<T>& grads) {
  if (!cache.valid) throw UsageError("network: backward called before forward");
  const NetworkConfig& cfg = net.config;
  const std::vector<std::string> names = fm_block_names(cfg);
  const std::size_t last = names.size() - 1;

  FeatureMap<T> g = fm_block_backward(grad_prediction, cache.blocks[last], fm_block_spec(cfg, names[last]),
                                      net.params, names[last], grads);

  FeatureMap<T> dx0;  // gradient wrt G0's output
  if (cfg.p == 1) {
    dx0 = std::move(g);
  } else {
    // Gradients flowing into the outputs of f1..f{p-1} (index u-1).
    std::vector<FeatureMap<T>> dinterior(cfg.p - 1);
    if (cfg.fusion_enabled) {
      FeatureMap<T> dconcat =
          fm_block_backward(g, cache.blocks[last - 1], fm_block_spec(cfg, "fc"), net.params, "fc", grads);
      // Concat row block i held the output of f^{p-1-i}.
      for (int i = 0; i < cfg.p - 1; ++i) {
        FeatureMap<T> slice(cfg.c, dconcat.height, dconcat.width);
        slice.values = dconcat.values.middleRows(static_cast<Eigen::Index>(i) * cfg.c, cfg.c);
        dinterior[cfg.p - 2 - i] = std::move(slice);
      }
    } else {
      dinterior[cfg.p - 2] = std::move(g);
    }

    for (int u = cfg.p - 1; u >= 1; --u) {
      FeatureMap<T> dx = fm_block_backward(dinterior[u - 1], cache.blocks[u - 1],
                                           fm_block_spec(cfg, names[u - 1]), net.params, names[u - 1],
                                           grads);
      if (u >= 2) dinterior[u - 2].values += dx.values;
      else dx0 = std::move(dx);
    }
  }

  FeatureMap<T> dupsampled = conv_block_backward(dx0, cache.g0, net.params, "g0", grads);
  dupsampled.values += grad_prediction.values;  // global residual
  return dupsampled;
}

// Ablation switches: mix_enabled=false replaces every mixing output with the
// constant 1/n; fusion_enabled=false removes the skip connections and the
// fusion block (its parameters are dropped so the returned network matches a
// fusion-free build). Re-enabling fusion on a network built without it is an
// error because the fusion parameters do not exist.
template <typename T>
Network<T> set_ablation(const Network<T>& net, bool mix_enabled, bool fusion_enabled) {
  Network<T> out = net;
  out.config.mix_enabled = mix_enabled;
  if (fusion_enabled && !net.config.fusion_enabled) {
    throw ConfigError("set_ablation: cannot enable fusion, the network was built without a fusion block");
  }
  if (!fusion_enabled && net.config.fusion_enabled) {
    out.params.erase_prefix("fc.");
    out.config.fusion_enabled = false;
  }
  return out;
}

}  // namespace fmnet
