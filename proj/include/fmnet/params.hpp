#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "fmnet/tensor.hpp"

namespace fmnet {

template <typename T>
struct NamedArray {
  std::vector<int> dims;
  VectorX<T> data;  // flat, row-major over dims

  Eigen::Index size() const { return data.size(); }
};

inline Eigen::Index dims_product(const std::vector<int>& dims) {
  Eigen::Index n = 1;
  for (int d : dims) n *= d;
  return n;
}

inline std::string dims_to_string(const std::vector<int>& dims) {
  std::string s = "[";
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

// Named real arrays for every kernel and bias in a block or network, keyed by
// a stable hierarchical name. Insertion order is preserved; it defines the
// serialization order and the order gradients and optimizer state follow.
template <typename T>
class ParameterSet {
 public:
  NamedArray<T>& add(const std::string& name, std::vector<int> dims) {
    if (arrays_.count(name)) {
      throw ConfigError("parameter '" + name + "' already exists");
    }
    order_.push_back(name);
    NamedArray<T>& a = arrays_[name];
    a.dims = std::move(dims);
    a.data = VectorX<T>::Zero(dims_product(a.dims));
    return a;
  }

  bool contains(const std::string& name) const { return arrays_.count(name) != 0; }

  const NamedArray<T>& at(const std::string& name) const {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw ConfigError("missing parameter '" + name + "'");
    return it->second;
  }

  NamedArray<T>& at(const std::string& name) {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw ConfigError("missing parameter '" + name + "'");
    return it->second;
  }

  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }

  std::int64_t total_parameters() const {
    std::int64_t n = 0;
    for (const auto& name : order_) n += arrays_.at(name).size();
    return n;
  }

  void set_zero() {
    for (auto& name : order_) arrays_[name].data.setZero();
  }

  // Same names and shapes, all-zero data. Gradient and moment buffers.
  ParameterSet zeros_like() const {
    ParameterSet out;
    for (const auto& name : order_) out.add(name, arrays_.at(name).dims);
    return out;
  }

  void erase_prefix(const std::string& prefix) {
    std::vector<std::string> kept;
    kept.reserve(order_.size());
    for (const auto& name : order_) {
      if (name.rfind(prefix, 0) == 0) {
        arrays_.erase(name);
      } else {
        kept.push_back(name);
      }
    }
    order_ = std::move(kept);
  }

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& name : order_) {
      const NamedArray<T>& a = arrays_.at(name);
      auto& b = out.add(name, a.dims);
      b.data = a.data.template cast<U>();
    }
    return out;
  }

  bool same_layout(const ParameterSet& o) const {
    if (order_ != o.order_) return false;
    for (const auto& name : order_) {
      if (arrays_.at(name).dims != o.arrays_.at(name).dims) return false;
    }
    return true;
  }

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, NamedArray<T>> arrays_;
};

// Shape guard used by every forward pass; names the offending array.
template <typename T>
const NamedArray<T>& expect_array(const ParameterSet<T>& params, const std::string& name,
                                  const std::vector<int>& dims) {
  const NamedArray<T>& a = params.at(name);
  if (a.dims != dims) {
    throw ConfigError("parameter '" + name + "' has shape " + dims_to_string(a.dims) +
                      ", expected " + dims_to_string(dims));
  }
  return a;
}

}  // namespace fmnet
