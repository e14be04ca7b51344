#pragma once

#include "fmnet/network.hpp"

namespace fmnet {

// Spectral upsampling re-exposed as a standalone predictor; the weakest
// comparison point every trained model should beat.
inline SpectralImage bi_baseline(const RgbImage& rgb, int bands,
                                 const ChannelOrder& order = kDefaultChannelOrder) {
  return spectral_upsample(rgb, bands, order);
}

// The n=1 variant: every FM block degenerates to a plain conv-block chain
// (the single mixing weight is constant 1), at comparable depth and width.
inline NetworkConfig dcnn_variant_config() {
  NetworkConfig cfg;
  cfg.n = 1;
  cfg.kernels = {3};
  cfg.mix_enabled = false;
  return cfg;
}

}  // namespace fmnet
