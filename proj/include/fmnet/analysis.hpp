#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fmnet/network.hpp"

namespace fmnet {

// Min-max normalization into [0,1]. A constant map has no range; it renders
// as uniform 0.5.
Eigen::MatrixXf normalize_map(const Eigen::MatrixXf& map);

// Binary PGM (P5, maxval 255); values expected in [0,1], rounded to bytes.
void write_pgm(const Eigen::MatrixXf& map01, const std::string& path);

// Runs the network and writes one grayscale image per (block, basis):
// weights_<block>_<basis>.pgm, each map normalized independently. Returns
// the written paths in order.
std::vector<std::string> export_weight_maps(const Network<float>& net, const RgbImage& rgb,
                                            const std::string& out_dir);

// Writes the per-pixel spectral error map as <base>.pgm (min-max normalized
// 8-bit) and <base>.hsi (raw float map, single-band container).
void export_error_map(const SpectralImage& pred, const SpectralImage& gt, const std::string& base);

// One CSV row per band: band index first, then one column per requested
// (row, col) pixel. Values are printed so float32 data round-trips exactly.
void extract_spectra(const SpectralImage& image, const std::vector<std::pair<int, int>>& pixels,
                     const std::string& path);

}  // namespace fmnet
