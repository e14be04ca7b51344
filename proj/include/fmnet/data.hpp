#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fmnet/tensor.hpp"

namespace fmnet {

// B x 3 sensor sensitivity matrix; column j is channel j's response across
// the spectral bands (columns ordered R, G, B).
using SpectralResponseMatrix = Eigen::MatrixXf;

// Mean |second difference| along the band axis that generate_synthetic_dataset
// promises not to exceed (its spectra are sums of smooth Gaussian bumps).
inline constexpr double kSyntheticSpectralSmoothnessBound = 0.05;

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
};

struct ImagePair {
  std::string id;
  SpectralImage hsi;
  RgbImage rgb;
};

// --- HSI container ("HSC1": u32le B,H,W then band-major float32le planes) ---
SpectralImage load_hsi(const std::string& path);
void save_hsi(const SpectralImage& image, const std::string& path);

// --- SRF files: CSV with B rows of 3 nonnegative decimals, no header ---
SpectralResponseMatrix load_srf_csv(const std::string& path);
void save_srf_csv(const SpectralResponseMatrix& srf, const std::string& path);

// Built-in smooth SRF: three Gaussian sensitivity curves (R peaking at the
// long-wavelength end, B at the short end).
SpectralResponseMatrix synthetic_srf(int bands);

// Projects the cube through the SRF and divides each channel by its SRF
// column sum, so constant-reflectance scenes map to the same constant RGB.
// Clipped to [0,1].
RgbImage synthesize_rgb(const SpectralImage& hsi, const SpectralResponseMatrix& srf);

// Deterministic shuffle of `ids`; the first n_train become the train set.
DatasetSplit split_dataset(std::vector<std::string> ids, int n_train, std::uint64_t seed);

// Manifest: "[train]" section then "[test]" section, one id per line.
void save_split(const DatasetSplit& split, const std::string& path);
DatasetSplit load_split(const std::string& path);

struct PatchPair {
  RgbImage rgb;
  SpectralImage hsi;
};

// Spatially aligned random crops at identical coordinates, deterministic
// given the seed. patch_size must fit inside every image.
std::vector<PatchPair> sample_patches(const std::vector<ImagePair>& pairs, int patch_size, int count,
                                      std::uint64_t seed);

// Desk-scale synthetic pairs: each cube is a sum of smooth spatial blobs
// carrying Gaussian-bump spectra, scaled into [0,1); RGB comes from
// synthesize_rgb with synthetic_srf(bands).
std::vector<ImagePair> generate_synthetic_dataset(int count, int bands, int size, std::uint64_t seed);

// Reads <dir>/<id>.hsi and <dir>/<id>.rgb for every id.
std::vector<ImagePair> load_dataset_dir(const std::string& dir, const std::vector<std::string>& ids);

}  // namespace fmnet
