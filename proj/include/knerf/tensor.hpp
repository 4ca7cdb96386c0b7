#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "knerf/common.hpp"
#include "knerf/rng.hpp"

namespace knerf {

// A named flat array of trainable scalars in row-major layout.
template <typename T>
struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<T> data;

  ParamTensor() = default;
  ParamTensor(std::string n, std::vector<int> s) : name(std::move(n)), shape(std::move(s)) {
    for (int d : shape) KNERF_REQUIRE(d > 0, "ParamTensor " + name + ": non-positive dimension");
    data.assign(static_cast<size_t>(element_count(shape)), T(0));
  }

  static int64_t element_count(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
  }

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  // Symmetric uniform init in [-sqrt(6/(fan_in+fan_out)), +...] for a
  // rows x cols weight matrix.
  void init_glorot(Pcg32& rng) {
    double bound = std::sqrt(6.0 / (rows() + cols()));
    for (auto& v : data) v = static_cast<T>(rng.uniform_in(-bound, bound));
  }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

// An ordered collection of ParamTensors; the unit the optimizer and the
// checkpoint format operate on.
template <typename T>
struct ParamSet {
  std::vector<ParamTensor<T>> tensors;

  int add(std::string name, std::vector<int> shape) {
    KNERF_REQUIRE(find(name) == -1, "duplicate tensor name: " + name);
    tensors.emplace_back(std::move(name), std::move(shape));
    return static_cast<int>(tensors.size()) - 1;
  }

  int find(std::string_view name) const {
    for (size_t i = 0; i < tensors.size(); ++i)
      if (tensors[i].name == name) return static_cast<int>(i);
    return -1;
  }

  ParamTensor<T>& at(int idx) { return tensors.at(static_cast<size_t>(idx)); }
  const ParamTensor<T>& at(int idx) const { return tensors.at(static_cast<size_t>(idx)); }

  int64_t total_size() const {
    int64_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
  }

  bool all_finite(std::string* offender = nullptr) const {
    for (const auto& t : tensors)
      if (!t.all_finite()) {
        if (offender) *offender = t.name;
        return false;
      }
    return true;
  }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    out.tensors.reserve(tensors.size());
    for (const auto& t : tensors) {
      ParamTensor<U> u(t.name, t.shape);
      for (size_t i = 0; i < t.data.size(); ++i) u.data[i] = static_cast<U>(t.data[i]);
      out.tensors.push_back(std::move(u));
    }
    return out;
  }
};

// Gradient arrays shape-congruent with one ParamSet. Zeroed before each
// accumulation pass.
template <typename T>
struct GradientStore {
  std::vector<std::vector<T>> grads;

  GradientStore() = default;
  explicit GradientStore(const ParamSet<T>& params) {
    grads.reserve(params.tensors.size());
    for (const auto& t : params.tensors) grads.emplace_back(static_cast<size_t>(t.size()), T(0));
  }

  void zero() {
    for (auto& g : grads) std::fill(g.begin(), g.end(), T(0));
  }

  std::vector<T>& of(int idx) { return grads.at(static_cast<size_t>(idx)); }
  const std::vector<T>& of(int idx) const { return grads.at(static_cast<size_t>(idx)); }

  void check_congruent(const ParamSet<T>& params) const {
    KNERF_REQUIRE(grads.size() == params.tensors.size(), "GradientStore: tensor count mismatch");
    for (size_t i = 0; i < grads.size(); ++i)
      KNERF_REQUIRE(static_cast<int64_t>(grads[i].size()) == params.tensors[i].size(),
                    "GradientStore: shape mismatch for " + params.tensors[i].name);
  }
};

}  // namespace knerf
