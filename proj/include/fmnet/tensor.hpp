#pragma once

#include <Eigen/Dense>

#include "fmnet/errors.hpp"

namespace fmnet {

template <typename T>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Dense channels x height x width stack. Pixels run row-major along the
// columns (p = h*width + w), so a channel plane is a row of `values` and
// per-pixel operations are column-wise.
template <typename T>
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  MatrixX<T> values;  // channels x (height*width)

  FeatureMap() = default;
  FeatureMap(int c, int h, int w)
      : channels(c), height(h), width(w), values(MatrixX<T>::Zero(c, static_cast<Eigen::Index>(h) * w)) {}

  Eigen::Index pixels() const { return static_cast<Eigen::Index>(height) * width; }

  T& at(int c, int h, int w) { return values(c, static_cast<Eigen::Index>(h) * width + w); }
  T at(int c, int h, int w) const { return values(c, static_cast<Eigen::Index>(h) * width + w); }

  bool same_shape(const FeatureMap& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  bool all_finite() const { return values.allFinite(); }

  template <typename U>
  FeatureMap<U> cast() const {
    FeatureMap<U> out;
    out.channels = channels;
    out.height = height;
    out.width = width;
    out.values = values.template cast<U>();
    return out;
  }
};

// Per-pixel simplex weights over n basis functions: every value >= 0 and each
// pixel column sums to 1.
template <typename T>
struct MixWeightMaps {
  int n = 0;
  int height = 0;
  int width = 0;
  MatrixX<T> values;  // n x (height*width)

  MixWeightMaps() = default;
  MixWeightMaps(int n_, int h, int w)
      : n(n_), height(h), width(w), values(MatrixX<T>::Zero(n_, static_cast<Eigen::Index>(h) * w)) {}

  Eigen::Index pixels() const { return static_cast<Eigen::Index>(height) * width; }
};

// Hyperspectral cube (bands x H x W) and RGB image (3 x H x W), values
// nominally in [0,1]; 8-bit scaling happens only at the metrics/export layer.
using SpectralImage = FeatureMap<float>;
using RgbImage = FeatureMap<float>;

inline void require_rgb(const RgbImage& img, const char* what) {
  if (img.channels != 3) {
    throw ConfigError(std::string(what) + ": expected 3 channels, got " + std::to_string(img.channels));
  }
}

}  // namespace fmnet
