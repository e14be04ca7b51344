#include "fmnet/training.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fmnet/errors.hpp"

namespace fmnet {

namespace {

constexpr char kCkptMagic[8] = {'F', 'M', 'C', 'K', 'P', 'T', '1', '\0'};
constexpr std::uint32_t kCkptVersion = 1;

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

void write_array(std::ostream& os, const std::string& name, const NamedArray<float>& a) {
  write_u32le(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u32le(os, static_cast<std::uint32_t>(a.dims.size()));
  for (int d : a.dims) write_u32le(os, static_cast<std::uint32_t>(d));
  if (a.data.size() == 0) return;
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(a.data.data()), a.data.size() * 4);
  } else {
    for (Eigen::Index i = 0; i < a.data.size(); ++i) {
      write_u32le(os, std::bit_cast<std::uint32_t>(a.data[i]));
    }
  }
}

struct RawArray {
  std::string name;
  NamedArray<float> array;
};

RawArray read_array(std::istream& is, const std::string& path) {
  RawArray out;
  const std::uint32_t name_len = read_u32le(is, path, "array name length");
  if (name_len > 4096) throw DataError(path + ": implausible array name length");
  out.name.resize(name_len);
  if (!is.read(out.name.data(), name_len)) throw DataError(path + ": truncated array name");
  const std::uint32_t rank = read_u32le(is, path, "array rank");
  if (rank > 8) throw DataError(path + ": implausible array rank");
  std::uint64_t total = 1;
  out.array.dims.resize(rank);
  for (std::uint32_t i = 0; i < rank; ++i) {
    out.array.dims[i] = static_cast<int>(read_u32le(is, path, "array dim"));
    total *= static_cast<std::uint64_t>(out.array.dims[i]);
    if (total > (1ull << 31)) throw DataError(path + ": array '" + out.name + "' dimension overflow");
  }
  out.array.data.resize(static_cast<Eigen::Index>(total));
  if (total == 0) return out;
  if constexpr (std::endian::native == std::endian::little) {
    if (!is.read(reinterpret_cast<char*>(out.array.data.data()),
                 static_cast<std::streamsize>(total * 4))) {
      throw DataError(path + ": truncated payload of array '" + out.name + "'");
    }
  } else {
    for (std::uint64_t i = 0; i < total; ++i) {
      out.array.data[static_cast<Eigen::Index>(i)] =
          std::bit_cast<float>(read_u32le(is, path, "array payload"));
    }
  }
  return out;
}

bool ends_with(const std::string& s, const char* suffix) {
  const std::size_t n = std::strlen(suffix);
  return s.size() >= n && s.compare(s.size() - n, n, suffix) == 0;
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (cfg.initial_lr <= 0) throw ConfigError("train: initial_lr must be positive");
  if (cfg.halve_every < 1) throw ConfigError("train: halve_every must be >= 1");
  if (cfg.weight_decay < 0) throw ConfigError("train: weight_decay must be >= 0");
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (cfg.patch_size < 1) throw ConfigError("train: patch_size must be >= 1");
  if (cfg.crops_per_image < 1) throw ConfigError("train: crops_per_image must be >= 1");
  if (!(cfg.beta1 >= 0 && cfg.beta1 < 1) || !(cfg.beta2 >= 0 && cfg.beta2 < 1)) {
    throw ConfigError("train: moment coefficients must lie in [0,1)");
  }
  if (cfg.epsilon <= 0) throw ConfigError("train: epsilon must be positive");
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  if (epoch < 0) throw UsageError("lr_at_epoch: epoch must be >= 0");
  return cfg.initial_lr * std::pow(0.5, epoch / cfg.halve_every);
}

double l1_loss(const SpectralImage& pred, const SpectralImage& target) {
  if (!pred.same_shape(target)) throw ConfigError("l1_loss: shapes differ");
  const Eigen::MatrixXd d = pred.values.cast<double>() - target.values.cast<double>();
  return d.array().abs().sum() / static_cast<double>(d.size());
}

double l1_loss(const std::vector<SpectralImage>& pred, const std::vector<SpectralImage>& target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw ConfigError("l1_loss: batch sizes differ or are empty");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += l1_loss(pred[i], target[i]);
  return total / static_cast<double>(pred.size());
}

void adam_step(ParameterSet<float>& params, const ParameterSet<float>& grads, AdamState& state,
               const TrainConfig& cfg, double lr) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const float b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
  for (const std::string& name : params.names()) {
    auto& w = params.at(name).data;
    auto& m = state.m.at(name).data;
    auto& v = state.v.at(name).data;
    VectorX<float> g = grads.at(name).data;
    if (cfg.weight_decay > 0 && ends_with(name, ".weight")) {
      g += static_cast<float>(cfg.weight_decay) * w;
    }
    m = b1 * m + (1.0f - b1) * g;
    v = (b2 * v.array() + (1.0f - b2) * g.array().square()).matrix();
    const auto mhat = m.array() / static_cast<float>(bc1);
    const auto vhat = v.array() / static_cast<float>(bc2);
    w.array() -= static_cast<float>(lr) * mhat / (vhat.sqrt() + static_cast<float>(cfg.epsilon));
  }
}

Checkpoint train(const NetworkConfig& net_config, const TrainConfig& cfg,
                 const std::vector<ImagePair>& pairs, const Checkpoint* resume,
                 std::vector<EpochLog>* log) {
  validate(net_config);
  validate(cfg);
  if (pairs.empty()) throw UsageError("train: empty training set");
  const std::int64_t available = static_cast<std::int64_t>(pairs.size()) * cfg.crops_per_image;
  if (cfg.batch_size > available) {
    throw UsageError("train: batch_size " + std::to_string(cfg.batch_size) + " exceeds the " +
                     std::to_string(available) + " patches available per epoch; raise crops_per_image");
  }

  Network<float> net;
  AdamState opt;
  int start_epoch = 0;
  std::vector<float> loss_history;
  if (resume) {
    if (network_config_to_text(resume->config) != network_config_to_text(net_config)) {
      throw ConfigError("train: checkpoint network config does not match the requested config");
    }
    net.config = resume->config;
    net.params = resume->params;
    opt = resume->opt;
    start_epoch = resume->epoch;
    loss_history = resume->loss_history;
  } else {
    net = build_network<float>(net_config, cfg.seed);
    opt.m = net.params.zeros_like();
    opt.v = net.params.zeros_like();
  }

  const int steps_per_epoch =
      static_cast<int>(std::max<std::int64_t>(1, (available + cfg.batch_size - 1) / cfg.batch_size));
  ParameterSet<float> grads = net.params.zeros_like();

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_at_epoch(cfg, epoch);
    double epoch_loss = 0.0;

    for (int step = 0; step < steps_per_epoch; ++step) {
      const std::uint64_t batch_seed =
          mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(step));
      const std::vector<PatchPair> batch = sample_patches(pairs, cfg.patch_size, cfg.batch_size, batch_seed);

      grads.set_zero();
      double batch_loss = 0.0;
      const double inv = 1.0 / (static_cast<double>(batch.size()) *
                                static_cast<double>(batch.front().hsi.values.size()));
      NetForwardCache<float> cache;
      for (const PatchPair& sample : batch) {
        auto [pred, maps] = forward(net, sample.rgb, &cache);
        const Eigen::MatrixXf diff = pred.values - sample.hsi.values;
        batch_loss += static_cast<double>(diff.cast<double>().array().abs().sum()) * inv;
        FeatureMap<float> dpred(pred.channels, pred.height, pred.width);
        dpred.values = diff.array().sign() * static_cast<float>(inv);
        backward(net, cache, dpred, grads);
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(step));
      }
      adam_step(net.params, grads, opt, cfg, lr);
      epoch_loss += batch_loss;
    }

    epoch_loss /= steps_per_epoch;
    loss_history.push_back(static_cast<float>(epoch_loss));
    if (log) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log->push_back(EpochLog{epoch, lr, epoch_loss, secs});
    }
  }

  Checkpoint ckpt;
  ckpt.version = kCkptVersion;
  ckpt.config = net.config;
  ckpt.params = std::move(net.params);
  ckpt.opt = std::move(opt);
  ckpt.epoch = std::max(start_epoch, cfg.epochs);
  ckpt.loss_history = std::move(loss_history);
  return ckpt;
}

std::string network_config_to_text(const NetworkConfig& cfg) {
  std::ostringstream os;
  os << "p=" << cfg.p << "\n";
  os << "n=" << cfg.n << "\n";
  os << "m=" << cfg.m << "\n";
  os << "c=" << cfg.c << "\n";
  os << "kernels=";
  for (std::size_t i = 0; i < cfg.kernels.size(); ++i) os << (i ? "," : "") << cfg.kernels[i];
  os << "\n";
  os << "bands=" << cfg.bands << "\n";
  os << "fusion=" << (cfg.fusion_enabled ? 1 : 0) << "\n";
  os << "mix=" << (cfg.mix_enabled ? 1 : 0) << "\n";
  os << "channel_order=" << cfg.channel_order[0] << "," << cfg.channel_order[1] << ","
     << cfg.channel_order[2] << "\n";
  return os.str();
}

namespace {

std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stoi(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw DataError(what + ": cannot parse integer list entry '" + item + "'");
    }
  }
  return out;
}

}  // namespace

NetworkConfig network_config_from_text(const std::string& text) {
  NetworkConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("config snapshot: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "p") cfg.p = std::stoi(value);
      else if (key == "n") cfg.n = std::stoi(value);
      else if (key == "m") cfg.m = std::stoi(value);
      else if (key == "c") cfg.c = std::stoi(value);
      else if (key == "kernels") cfg.kernels = parse_int_list(value, "kernels");
      else if (key == "bands") cfg.bands = std::stoi(value);
      else if (key == "fusion") cfg.fusion_enabled = std::stoi(value) != 0;
      else if (key == "mix") cfg.mix_enabled = std::stoi(value) != 0;
      else if (key == "channel_order") {
        const std::vector<int> v = parse_int_list(value, "channel_order");
        if (v.size() != 3) throw DataError("config snapshot: channel_order needs 3 entries");
        cfg.channel_order = {v[0], v[1], v[2]};
      }
      // Unknown keys (epoch, adam_step, ...) are read elsewhere.
    } catch (const DataError&) {
      throw;
    } catch (const std::exception&) {
      throw DataError("config snapshot: cannot parse '" + line + "'");
    }
  }
  validate(cfg);
  return cfg;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError(path + ": cannot open for writing");
  os.write(kCkptMagic, 8);
  write_u32le(os, ckpt.version);

  std::string snapshot = network_config_to_text(ckpt.config);
  snapshot += "epoch=" + std::to_string(ckpt.epoch) + "\n";
  snapshot += "adam_step=" + std::to_string(ckpt.opt.step) + "\n";
  write_u32le(os, static_cast<std::uint32_t>(snapshot.size()));
  os.write(snapshot.data(), static_cast<std::streamsize>(snapshot.size()));

  const std::uint32_t count = static_cast<std::uint32_t>(ckpt.params.size() + ckpt.opt.m.size() +
                                                         ckpt.opt.v.size() + 1);
  write_u32le(os, count);
  for (const auto& name : ckpt.params.names()) write_array(os, name, ckpt.params.at(name));
  for (const auto& name : ckpt.opt.m.names()) write_array(os, "adam.m." + name, ckpt.opt.m.at(name));
  for (const auto& name : ckpt.opt.v.names()) write_array(os, "adam.v." + name, ckpt.opt.v.at(name));
  NamedArray<float> hist;
  hist.dims = {static_cast<int>(ckpt.loss_history.size())};
  if (!ckpt.loss_history.empty()) {
    hist.data = Eigen::Map<const VectorX<float>>(ckpt.loss_history.data(),
                                                 static_cast<Eigen::Index>(ckpt.loss_history.size()));
  }
  write_array(os, "train.loss_history", hist);
  if (!os) throw DataError(path + ": write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path + ": cannot open for reading");
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCkptMagic, 8) != 0) {
    throw DataError(path + ": bad magic, not an FMCKPT1 checkpoint");
  }
  Checkpoint ckpt;
  ckpt.version = read_u32le(is, path, "version");
  if (ckpt.version != kCkptVersion) {
    throw DataError(path + ": unsupported checkpoint version " + std::to_string(ckpt.version));
  }
  const std::uint32_t snap_len = read_u32le(is, path, "snapshot length");
  if (snap_len > (1u << 20)) throw DataError(path + ": implausible snapshot length");
  std::string snapshot(snap_len, '\0');
  if (!is.read(snapshot.data(), snap_len)) throw DataError(path + ": truncated config snapshot");
  ckpt.config = network_config_from_text(snapshot);

  // epoch and adam_step ride in the snapshot text.
  std::int64_t adam_step = 0;
  {
    std::istringstream ss(snapshot);
    std::string line;
    while (std::getline(ss, line)) {
      if (line.rfind("epoch=", 0) == 0) ckpt.epoch = std::stoi(line.substr(6));
      if (line.rfind("adam_step=", 0) == 0) adam_step = std::stoll(line.substr(10));
    }
  }

  const std::uint32_t count = read_u32le(is, path, "array count");
  if (count > 100000) throw DataError(path + ": implausible array count");
  bool saw_history = false;
  for (std::uint32_t i = 0; i < count; ++i) {
    RawArray raw = read_array(is, path);
    if (raw.name.rfind("adam.m.", 0) == 0) {
      ckpt.opt.m.add(raw.name.substr(7), raw.array.dims).data = raw.array.data;
    } else if (raw.name.rfind("adam.v.", 0) == 0) {
      ckpt.opt.v.add(raw.name.substr(7), raw.array.dims).data = raw.array.data;
    } else if (raw.name == "train.loss_history") {
      ckpt.loss_history.assign(raw.array.data.data(), raw.array.data.data() + raw.array.data.size());
      saw_history = true;
    } else {
      ckpt.params.add(raw.name, raw.array.dims).data = raw.array.data;
    }
  }
  if (!saw_history) throw DataError(path + ": missing train.loss_history array");
  ckpt.opt.step = adam_step;

  // The snapshot must describe exactly the arrays present.
  const ParameterSet<float> expected = build_network<float>(ckpt.config, 0).params;
  if (!expected.same_layout(ckpt.params)) {
    throw DataError(path + ": parameter arrays do not match the config snapshot");
  }
  if (!expected.same_layout(ckpt.opt.m) || !expected.same_layout(ckpt.opt.v)) {
    throw DataError(path + ": optimizer state does not match the config snapshot");
  }
  return ckpt;
}

void write_train_log_csv(const std::vector<EpochLog>& log, const std::string& path, bool append) {
  const bool exists = std::filesystem::exists(path);
  std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
  if (!os) throw DataError(path + ": cannot open for writing");
  if (!append || !exists) os << "epoch,lr,train_loss,wall_seconds\n";
  char buf[128];
  for (const EpochLog& e : log) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.3f\n", e.epoch, e.lr, e.train_loss, e.wall_seconds);
    os << buf;
  }
}

}  // namespace fmnet
