#pragma once

#include <string>
#include <vector>

#include "fmnet/tensor.hpp"

namespace fmnet {

// PSNR values above this (including the zero-MSE case) are reported as the
// cap itself.
inline constexpr double kPsnrCapDb = 100.0;

struct ImageMetrics {
  std::string id;
  double rmse = 0.0;
  double psnr = 0.0;  // dB
  double sam = 0.0;   // degrees
  double ssim = 0.0;
};

struct MetricsReport {
  std::vector<ImageMetrics> per_image;
  // Per-image metrics averaged over the set. Note the mean PSNR is not the
  // PSNR of the mean RMSE; both are reported.
  double rmse = 0.0, psnr = 0.0, sam = 0.0, ssim = 0.0;
};

// Root-mean-square error over all B*H*W elements after multiplying by
// `scale` (255 matches 8-bit-range reporting on [0,1] data).
double rmse(const SpectralImage& a, const SpectralImage& b, double scale = 255.0);

// 10*log10(scale^2 / MSE), capped at kPsnrCapDb.
double psnr(const SpectralImage& a, const SpectralImage& b, double scale = 255.0);

// Mean spectral angle (degrees) between per-pixel band vectors; zero-norm
// pixels contribute angle 0 and stay in the average.
double sam(const SpectralImage& a, const SpectralImage& b);

// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5) and stability
// constants (0.01*scale)^2, (0.03*scale)^2, averaged over window positions
// and then over bands.
double ssim(const SpectralImage& a, const SpectralImage& b, double scale = 255.0);

// Per-pixel mean over bands of squared differences, as an H x W map.
Eigen::MatrixXf spectral_error_map(const SpectralImage& pred, const SpectralImage& gt);

ImageMetrics compute_image_metrics(const std::string& id, const SpectralImage& pred,
                                   const SpectralImage& gt, double scale = 255.0);

MetricsReport aggregate(std::vector<ImageMetrics> per_image);

// CSV: header image_id,rmse,psnr,sam,ssim; one row per image plus a MEAN row.
void write_metrics_csv(const MetricsReport& report, const std::string& path);

}  // namespace fmnet
