#include "fmnet/data.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fmnet/errors.hpp"
#include "fmnet/random.hpp"

namespace fmnet {

namespace {

constexpr char kHsiMagic[4] = {'H', 'S', 'C', '1'};
// Caps B*H*W so a corrupt header cannot trigger a giant allocation.
constexpr std::uint64_t kMaxElements = 1ull << 30;

void write_u32le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32le(std::istream& is, const std::string& path, const char* field) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw DataError(path + ": truncated while reading " + field);
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32le(std::ostream& os, const float* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 4));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      write_u32le(os, std::bit_cast<std::uint32_t>(data[i]));
    }
  }
}

void read_f32le(std::istream& is, float* data, std::size_t count, const std::string& path) {
  if constexpr (std::endian::native == std::endian::little) {
    if (!is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 4))) {
      throw DataError(path + ": truncated payload, expected " + std::to_string(count) + " float32 values");
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      data[i] = std::bit_cast<float>(read_u32le(is, path, "payload"));
    }
  }
}

}  // namespace

SpectralImage load_hsi(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path + ": cannot open for reading");
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kHsiMagic, 4) != 0) {
    throw DataError(path + ": bad magic, not an HSC1 container");
  }
  const std::uint32_t bands = read_u32le(is, path, "bands");
  const std::uint32_t height = read_u32le(is, path, "height");
  const std::uint32_t width = read_u32le(is, path, "width");
  if (bands == 0 || height == 0 || width == 0) {
    throw DataError(path + ": dimensions must be positive");
  }
  const std::uint64_t total = static_cast<std::uint64_t>(bands) * height * width;
  if (total > kMaxElements) {
    throw DataError(path + ": dimension overflow, " + std::to_string(total) + " elements exceeds the cap");
  }

  SpectralImage img(static_cast<int>(bands), static_cast<int>(height), static_cast<int>(width));
  std::vector<float> plane(static_cast<std::size_t>(height) * width);
  for (std::uint32_t b = 0; b < bands; ++b) {
    read_f32le(is, plane.data(), plane.size(), path);
    for (std::size_t p = 0; p < plane.size(); ++p) {
      img.values(b, static_cast<Eigen::Index>(p)) = plane[p];
    }
  }
  if (!img.all_finite()) throw DataError(path + ": payload contains non-finite values");
  return img;
}

void save_hsi(const SpectralImage& image, const std::string& path) {
  if (image.channels < 1 || image.height < 1 || image.width < 1) {
    throw ConfigError("save_hsi: image dimensions must be positive");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError(path + ": cannot open for writing");
  os.write(kHsiMagic, 4);
  write_u32le(os, static_cast<std::uint32_t>(image.channels));
  write_u32le(os, static_cast<std::uint32_t>(image.height));
  write_u32le(os, static_cast<std::uint32_t>(image.width));
  std::vector<float> plane(static_cast<std::size_t>(image.height) * image.width);
  for (int b = 0; b < image.channels; ++b) {
    for (std::size_t p = 0; p < plane.size(); ++p) {
      plane[p] = image.values(b, static_cast<Eigen::Index>(p));
    }
    write_f32le(os, plane.data(), plane.size());
  }
  if (!os) throw DataError(path + ": write failed");
}

SpectralResponseMatrix load_srf_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError(path + ": cannot open for reading");
  std::vector<std::array<float, 3>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::array<float, 3> row{};
    char extra;
    if (std::sscanf(line.c_str(), "%f,%f,%f %c", &row[0], &row[1], &row[2], &extra) != 3) {
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 3 comma-separated values");
    }
    for (float v : row) {
      if (!(v >= 0.0f) || !std::isfinite(v)) {
        throw DataError(path + ":" + std::to_string(lineno) + ": SRF entries must be finite and nonnegative");
      }
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw DataError(path + ": empty SRF file");
  SpectralResponseMatrix srf(rows.size(), 3);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int j = 0; j < 3; ++j) srf(static_cast<Eigen::Index>(r), j) = rows[r][j];
  }
  for (int j = 0; j < 3; ++j) {
    if (srf.col(j).sum() <= 0.0f) {
      throw DataError(path + ": SRF column " + std::to_string(j) + " is all zero");
    }
  }
  return srf;
}

void save_srf_csv(const SpectralResponseMatrix& srf, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError(path + ": cannot open for writing");
  char buf[96];
  for (Eigen::Index r = 0; r < srf.rows(); ++r) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g\n", srf(r, 0), srf(r, 1), srf(r, 2));
    os << buf;
  }
}

SpectralResponseMatrix synthetic_srf(int bands) {
  if (bands < 1) throw ConfigError("synthetic_srf: bands must be >= 1");
  SpectralResponseMatrix srf(bands, 3);
  // Gaussian sensitivity curves; bands ascend in wavelength, so R peaks high.
  const double centers[3] = {0.85, 0.50, 0.15};
  const double sigma = std::max(1.0, bands / 5.0);
  for (int b = 0; b < bands; ++b) {
    for (int j = 0; j < 3; ++j) {
      const double mu = centers[j] * (bands - 1);
      srf(b, j) = static_cast<float>(std::exp(-0.5 * std::pow((b - mu) / sigma, 2)));
    }
  }
  return srf;
}

RgbImage synthesize_rgb(const SpectralImage& hsi, const SpectralResponseMatrix& srf) {
  if (srf.rows() != hsi.channels) {
    throw DataError("synthesize_rgb: SRF has " + std::to_string(srf.rows()) + " bands, cube has " +
                    std::to_string(hsi.channels));
  }
  if (srf.cols() != 3) throw DataError("synthesize_rgb: SRF must have 3 columns");
  RgbImage rgb(3, hsi.height, hsi.width);
  rgb.values.noalias() = srf.transpose() * hsi.values;
  for (int j = 0; j < 3; ++j) {
    const float colsum = srf.col(j).sum();
    if (colsum <= 0.0f) throw DataError("synthesize_rgb: SRF column " + std::to_string(j) + " is all zero");
    rgb.values.row(j) /= colsum;
  }
  rgb.values = rgb.values.cwiseMax(0.0f).cwiseMin(1.0f);
  return rgb;
}

DatasetSplit split_dataset(std::vector<std::string> ids, int n_train, std::uint64_t seed) {
  if (n_train < 0 || n_train >= static_cast<int>(ids.size())) {
    throw UsageError("split_dataset: n_train must be in [0, " + std::to_string(ids.size()) + ")");
  }
  RandomEngine rng(mix_seed(seed, 0x5911d));
  // Fisher-Yates with the portable engine.
  for (std::size_t i = ids.size(); i > 1; --i) {
    std::swap(ids[i - 1], ids[rng.uniform_index(i)]);
  }
  DatasetSplit split;
  split.seed = seed;
  split.train.assign(ids.begin(), ids.begin() + n_train);
  split.test.assign(ids.begin() + n_train, ids.end());
  return split;
}

void save_split(const DatasetSplit& split, const std::string& path) {
  std::ofstream os(path, std::ios::trunc | std::ios::binary);
  if (!os) throw DataError(path + ": cannot open for writing");
  os << "[train]\n";
  for (const auto& id : split.train) os << id << "\n";
  os << "[test]\n";
  for (const auto& id : split.test) os << id << "\n";
}

DatasetSplit load_split(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError(path + ": cannot open for reading");
  DatasetSplit split;
  std::vector<std::string>* section = nullptr;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    if (line == "[train]") {
      section = &split.train;
    } else if (line == "[test]") {
      section = &split.test;
    } else if (line[0] == '[') {
      throw DataError(path + ":" + std::to_string(lineno) + ": unknown section " + line);
    } else {
      if (!section) {
        throw DataError(path + ":" + std::to_string(lineno) + ": id appears before any section header");
      }
      section->push_back(line);
    }
  }
  return split;
}

std::vector<PatchPair> sample_patches(const std::vector<ImagePair>& pairs, int patch_size, int count,
                                      std::uint64_t seed) {
  if (pairs.empty()) throw UsageError("sample_patches: empty pair list");
  if (patch_size < 1) throw UsageError("sample_patches: patch_size must be >= 1");
  for (const ImagePair& pair : pairs) {
    if (patch_size > pair.hsi.height || patch_size > pair.hsi.width) {
      throw UsageError("sample_patches: patch " + std::to_string(patch_size) + " exceeds image '" +
                       pair.id + "' (" + std::to_string(pair.hsi.height) + "x" +
                       std::to_string(pair.hsi.width) + ")");
    }
    if (pair.rgb.height != pair.hsi.height || pair.rgb.width != pair.hsi.width) {
      throw DataError("sample_patches: pair '" + pair.id + "' has mismatched RGB/HSI sizes");
    }
  }
  RandomEngine rng(mix_seed(seed, 0x9a7c15));
  std::vector<PatchPair> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const ImagePair& pair = pairs[rng.uniform_index(pairs.size())];
    const int h0 = static_cast<int>(rng.uniform_index(pair.hsi.height - patch_size + 1));
    const int w0 = static_cast<int>(rng.uniform_index(pair.hsi.width - patch_size + 1));
    PatchPair patch;
    patch.rgb = RgbImage(3, patch_size, patch_size);
    patch.hsi = SpectralImage(pair.hsi.channels, patch_size, patch_size);
    for (int h = 0; h < patch_size; ++h) {
      const Eigen::Index src = static_cast<Eigen::Index>(h0 + h) * pair.hsi.width + w0;
      const Eigen::Index dst = static_cast<Eigen::Index>(h) * patch_size;
      patch.rgb.values.middleCols(dst, patch_size) = pair.rgb.values.middleCols(src, patch_size);
      patch.hsi.values.middleCols(dst, patch_size) = pair.hsi.values.middleCols(src, patch_size);
    }
    out.push_back(std::move(patch));
  }
  return out;
}

std::vector<ImagePair> generate_synthetic_dataset(int count, int bands, int size, std::uint64_t seed) {
  if (count < 1) throw UsageError("generate_synthetic_dataset: count must be >= 1");
  if (bands < 1 || size < 1) throw UsageError("generate_synthetic_dataset: bands and size must be >= 1");
  const SpectralResponseMatrix srf = synthetic_srf(bands);

  std::vector<ImagePair> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    RandomEngine rng(mix_seed(seed, 0xb10b5, static_cast<std::uint64_t>(i)));
    SpectralImage hsi(bands, size, size);
    Eigen::MatrixXd cube = Eigen::MatrixXd::Zero(bands, hsi.pixels());

    const int blobs = 3 + static_cast<int>(rng.uniform_index(4));
    for (int k = 0; k < blobs; ++k) {
      const double cy = rng.uniform(0.0, size);
      const double cx = rng.uniform(0.0, size);
      const double sigma_sp = rng.uniform(size / 8.0, size / 3.0);
      const double amp = rng.uniform(0.3, 1.0);
      const double mu_b = rng.uniform(0.0, bands - 1.0);
      const double sigma_b = rng.uniform(std::max(1.0, bands / 6.0), std::max(1.5, bands / 3.0));

      Eigen::VectorXd spectrum(bands);
      for (int b = 0; b < bands; ++b) {
        spectrum[b] = std::exp(-0.5 * std::pow((b - mu_b) / sigma_b, 2));
      }
      Eigen::VectorXd spatial(hsi.pixels());
      for (int h = 0; h < size; ++h) {
        for (int w = 0; w < size; ++w) {
          const double d2 = std::pow(h - cy, 2) + std::pow(w - cx, 2);
          spatial[static_cast<Eigen::Index>(h) * size + w] = std::exp(-0.5 * d2 / (sigma_sp * sigma_sp));
        }
      }
      cube.noalias() += amp * spectrum * spatial.transpose();
    }
    // Scale into [0, 0.95] without disturbing smoothness.
    const double peak = cube.maxCoeff();
    if (peak > 0.95) cube *= 0.95 / peak;

    hsi.values = cube.cast<float>();
    char id[32];
    std::snprintf(id, sizeof id, "synth_%04d", i);
    out.push_back(ImagePair{id, std::move(hsi), RgbImage{}});
    out.back().rgb = synthesize_rgb(out.back().hsi, srf);
  }
  return out;
}

std::vector<ImagePair> load_dataset_dir(const std::string& dir, const std::vector<std::string>& ids) {
  std::vector<ImagePair> out;
  out.reserve(ids.size());
  for (const std::string& id : ids) {
    ImagePair pair;
    pair.id = id;
    pair.hsi = load_hsi(dir + "/" + id + ".hsi");
    SpectralImage rgb = load_hsi(dir + "/" + id + ".rgb");
    if (rgb.channels != 3) {
      throw DataError(dir + "/" + id + ".rgb: expected 3 channels, got " + std::to_string(rgb.channels));
    }
    if (rgb.height != pair.hsi.height || rgb.width != pair.hsi.width) {
      throw DataError(dir + "/" + id + ": RGB and HSI spatial sizes differ");
    }
    pair.rgb = std::move(rgb);
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace fmnet
