#include "fmnet/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "fmnet/errors.hpp"

namespace fmnet {

namespace {

void require_same_shape(const SpectralImage& a, const SpectralImage& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ConfigError(std::string(what) + ": shapes differ (" + std::to_string(a.channels) + "x" +
                      std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                      std::to_string(b.channels) + "x" + std::to_string(b.height) + "x" +
                      std::to_string(b.width) + ")");
  }
}

double mse_scaled(const SpectralImage& a, const SpectralImage& b, double scale) {
  const Eigen::MatrixXd d =
      (a.values.cast<double>() - b.values.cast<double>()) * scale;
  return d.array().square().sum() / static_cast<double>(d.size());
}

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

Eigen::VectorXd ssim_gaussian_1d() {
  Eigen::VectorXd g(kSsimWindow);
  const double c = (kSsimWindow - 1) / 2.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    g[i] = std::exp(-0.5 * std::pow((i - c) / kSsimSigma, 2));
  }
  return g / g.sum();
}

// Separable valid-mode Gaussian filter; rows first, then columns.
Eigen::MatrixXd gaussian_filter_valid(const Eigen::MatrixXd& x, const Eigen::VectorXd& g) {
  const int k = static_cast<int>(g.size());
  const Eigen::Index H = x.rows(), W = x.cols();
  Eigen::MatrixXd rows(H, W - k + 1);
  for (Eigen::Index j = 0; j + k <= W; ++j) {
    rows.col(j) = x.middleCols(j, k) * g;
  }
  Eigen::MatrixXd out(H - k + 1, rows.cols());
  for (Eigen::Index i = 0; i + k <= H; ++i) {
    out.row(i) = g.transpose() * rows.middleRows(i, k);
  }
  return out;
}

}  // namespace

double rmse(const SpectralImage& a, const SpectralImage& b, double scale) {
  require_same_shape(a, b, "rmse");
  return std::sqrt(mse_scaled(a, b, scale));
}

double psnr(const SpectralImage& a, const SpectralImage& b, double scale) {
  require_same_shape(a, b, "psnr");
  const double mse = mse_scaled(a, b, scale);
  if (mse <= 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(scale * scale / mse));
}

double sam(const SpectralImage& a, const SpectralImage& b) {
  require_same_shape(a, b, "sam");
  double total = 0.0;
  for (Eigen::Index p = 0; p < a.pixels(); ++p) {
    const Eigen::VectorXd va = a.values.col(p).cast<double>();
    const Eigen::VectorXd vb = b.values.col(p).cast<double>();
    const double na = va.norm(), nb = vb.norm();
    if (na == 0.0 || nb == 0.0) continue;  // zero-norm pixels contribute angle 0
    const double cosang = std::clamp(va.dot(vb) / (na * nb), -1.0, 1.0);
    total += std::acos(cosang);
  }
  return total / static_cast<double>(a.pixels()) * 180.0 / M_PI;
}

double ssim(const SpectralImage& a, const SpectralImage& b, double scale) {
  require_same_shape(a, b, "ssim");
  if (a.height < kSsimWindow || a.width < kSsimWindow) {
    throw ConfigError("ssim: spatial size must be at least " + std::to_string(kSsimWindow));
  }
  const double c1 = std::pow(0.01 * scale, 2);
  const double c2 = std::pow(0.03 * scale, 2);
  const Eigen::VectorXd g = ssim_gaussian_1d();

  double band_sum = 0.0;
  for (int band = 0; band < a.channels; ++band) {
    Eigen::MatrixXd x(a.height, a.width), y(a.height, a.width);
    for (int h = 0; h < a.height; ++h) {
      for (int w = 0; w < a.width; ++w) {
        x(h, w) = static_cast<double>(a.at(band, h, w)) * scale;
        y(h, w) = static_cast<double>(b.at(band, h, w)) * scale;
      }
    }
    const Eigen::MatrixXd mx = gaussian_filter_valid(x, g);
    const Eigen::MatrixXd my = gaussian_filter_valid(y, g);
    const Eigen::MatrixXd mxx = gaussian_filter_valid(x.cwiseProduct(x), g);
    const Eigen::MatrixXd myy = gaussian_filter_valid(y.cwiseProduct(y), g);
    const Eigen::MatrixXd mxy = gaussian_filter_valid(x.cwiseProduct(y), g);

    const Eigen::ArrayXXd vx = mxx.array() - mx.array().square();
    const Eigen::ArrayXXd vy = myy.array() - my.array().square();
    const Eigen::ArrayXXd cxy = mxy.array() - (mx.array() * my.array());

    const Eigen::ArrayXXd num = (2.0 * mx.array() * my.array() + c1) * (2.0 * cxy + c2);
    const Eigen::ArrayXXd den = (mx.array().square() + my.array().square() + c1) * (vx + vy + c2);
    band_sum += (num / den).mean();
  }
  return band_sum / a.channels;
}

Eigen::MatrixXf spectral_error_map(const SpectralImage& pred, const SpectralImage& gt) {
  require_same_shape(pred, gt, "spectral_error_map");
  const Eigen::MatrixXd d = pred.values.cast<double>() - gt.values.cast<double>();
  const Eigen::RowVectorXd per_pixel = d.array().square().colwise().mean();
  Eigen::MatrixXf map(pred.height, pred.width);
  for (int h = 0; h < pred.height; ++h) {
    for (int w = 0; w < pred.width; ++w) {
      map(h, w) = static_cast<float>(per_pixel[static_cast<Eigen::Index>(h) * pred.width + w]);
    }
  }
  return map;
}

ImageMetrics compute_image_metrics(const std::string& id, const SpectralImage& pred,
                                   const SpectralImage& gt, double scale) {
  ImageMetrics m;
  m.id = id;
  m.rmse = rmse(pred, gt, scale);
  m.psnr = psnr(pred, gt, scale);
  m.sam = sam(pred, gt);
  m.ssim = ssim(pred, gt, scale);
  return m;
}

MetricsReport aggregate(std::vector<ImageMetrics> per_image) {
  MetricsReport report;
  report.per_image = std::move(per_image);
  if (report.per_image.empty()) return report;
  for (const ImageMetrics& m : report.per_image) {
    report.rmse += m.rmse;
    report.psnr += m.psnr;
    report.sam += m.sam;
    report.ssim += m.ssim;
  }
  const double n = static_cast<double>(report.per_image.size());
  report.rmse /= n;
  report.psnr /= n;
  report.sam /= n;
  report.ssim /= n;
  return report;
}

void write_metrics_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError(path + ": cannot open for writing");
  os << "image_id,rmse,psnr,sam,ssim\n";
  char buf[160];
  for (const ImageMetrics& m : report.per_image) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f\n", m.id.c_str(), m.rmse, m.psnr, m.sam, m.ssim);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "MEAN,%.6f,%.6f,%.6f,%.6f\n", report.rmse, report.psnr, report.sam,
                report.ssim);
  os << buf;
}

}  // namespace fmnet
