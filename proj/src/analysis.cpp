#include "fmnet/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "fmnet/data.hpp"
#include "fmnet/errors.hpp"
#include "fmnet/metrics.hpp"

namespace fmnet {

Eigen::MatrixXf normalize_map(const Eigen::MatrixXf& map) {
  const float lo = map.minCoeff();
  const float hi = map.maxCoeff();
  if (hi == lo) return Eigen::MatrixXf::Constant(map.rows(), map.cols(), 0.5f);
  return (map.array() - lo) / (hi - lo);
}

void write_pgm(const Eigen::MatrixXf& map01, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError(path + ": cannot open for writing");
  os << "P5\n" << map01.cols() << " " << map01.rows() << "\n255\n";
  std::vector<unsigned char> row(map01.cols());
  for (Eigen::Index h = 0; h < map01.rows(); ++h) {
    for (Eigen::Index w = 0; w < map01.cols(); ++w) {
      const float v = std::clamp(map01(h, w), 0.0f, 1.0f);
      row[static_cast<std::size_t>(w)] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw DataError(path + ": write failed");
}

std::vector<std::string> export_weight_maps(const Network<float>& net, const RgbImage& rgb,
                                            const std::string& out_dir) {
  auto [pred, maps] = forward(net, rgb);
  (void)pred;
  const std::vector<std::string> blocks = fm_block_names(net.config);
  std::vector<std::string> written;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const MixWeightMaps<float>& wm = maps[b];
    for (int i = 0; i < wm.n; ++i) {
      Eigen::MatrixXf plane(wm.height, wm.width);
      for (int h = 0; h < wm.height; ++h) {
        for (int w = 0; w < wm.width; ++w) {
          plane(h, w) = wm.values(i, static_cast<Eigen::Index>(h) * wm.width + w);
        }
      }
      const std::string path =
          out_dir + "/weights_" + blocks[b] + "_" + std::to_string(i + 1) + ".pgm";
      write_pgm(normalize_map(plane), path);
      written.push_back(path);
    }
  }
  return written;
}

void export_error_map(const SpectralImage& pred, const SpectralImage& gt, const std::string& base) {
  const Eigen::MatrixXf map = spectral_error_map(pred, gt);
  write_pgm(normalize_map(map), base + ".pgm");

  SpectralImage raw(1, static_cast<int>(map.rows()), static_cast<int>(map.cols()));
  for (Eigen::Index h = 0; h < map.rows(); ++h) {
    for (Eigen::Index w = 0; w < map.cols(); ++w) {
      raw.values(0, h * map.cols() + w) = map(h, w);
    }
  }
  save_hsi(raw, base + ".hsi");
}

void extract_spectra(const SpectralImage& image, const std::vector<std::pair<int, int>>& pixels,
                     const std::string& path) {
  for (const auto& [h, w] : pixels) {
    if (h < 0 || h >= image.height || w < 0 || w >= image.width) {
      throw UsageError("extract_spectra: pixel (" + std::to_string(h) + "," + std::to_string(w) +
                       ") outside a " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                       " image");
    }
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError(path + ": cannot open for writing");
  os << "band";
  for (const auto& [h, w] : pixels) os << ",px_" << h << "_" << w;
  os << "\n";
  char buf[48];
  for (int b = 0; b < image.channels; ++b) {
    os << b;
    for (const auto& [h, w] : pixels) {
      // %.9g keeps float32 values exact through a text round-trip.
      std::snprintf(buf, sizeof buf, ",%.9g", static_cast<double>(image.at(b, h, w)));
      os << buf;
    }
    os << "\n";
  }
}

}  // namespace fmnet
