#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "knerf/tensor.hpp"

namespace knerf {

struct TrainConfig {
  int batch_rays = 1024;
  int iters_pretrain = 20000;
  int iters_projection = 8000;
  int iters_finetune = 4000;
  double base_lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double decay_denominator = 250000;
  uint64_t seed = 0;
  int eval_every = 1000;

  void validate() const {
    KNERF_REQUIRE(batch_rays >= 1, "TrainConfig: batch_rays must be >= 1");
    KNERF_REQUIRE(iters_pretrain >= 1 && iters_projection >= 1 && iters_finetune >= 0,
                  "TrainConfig: iteration counts must be >= 1");
    KNERF_REQUIRE(base_lr > 0, "TrainConfig: base_lr must be positive");
    KNERF_REQUIRE(decay_denominator > 0, "TrainConfig: decay_denominator must be positive");
  }
};

// lr = base_lr * 0.1^(iter / decay_denominator), continuous in iter.
inline double lr_schedule(int64_t iter, const TrainConfig& cfg) {
  KNERF_REQUIRE(iter >= 0, "lr_schedule: iter must be >= 0");
  return cfg.base_lr * std::pow(0.1, static_cast<double>(iter) / cfg.decay_denominator);
}

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  int64_t t = 0;

  AdamState() = default;
  explicit AdamState(const ParamSet<T>& params) {
    for (const auto& tensor : params.tensors) {
      m.emplace_back(static_cast<size_t>(tensor.size()), T(0));
      v.emplace_back(static_cast<size_t>(tensor.size()), T(0));
    }
  }
};

// Standard bias-corrected Adam update. A non-finite gradient aborts the step
// before any parameter is touched, naming the offending tensor.
template <typename T>
void adam_step(ParamSet<T>& params, const GradientStore<T>& grads, AdamState<T>& state, double lr,
               const TrainConfig& cfg) {
  grads.check_congruent(params);
  KNERF_REQUIRE(state.m.size() == params.tensors.size(), "AdamState: tensor count mismatch");

  for (size_t ti = 0; ti < params.tensors.size(); ++ti) {
    const auto& g = grads.of(static_cast<int>(ti));
    for (T gv : g)
      if (!std::isfinite(static_cast<double>(gv)))
        throw contract_error("adam_step: non-finite gradient in tensor " +
                             params.tensors[ti].name);
  }

  state.t += 1;
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T bc1 = T(1) - static_cast<T>(std::pow(cfg.beta1, static_cast<double>(state.t)));
  const T bc2 = T(1) - static_cast<T>(std::pow(cfg.beta2, static_cast<double>(state.t)));
  const T eps = static_cast<T>(cfg.adam_eps);
  const T step = static_cast<T>(lr);

  for (size_t ti = 0; ti < params.tensors.size(); ++ti) {
    auto& p = params.tensors[ti].data;
    const auto& g = grads.of(static_cast<int>(ti));
    auto& m = state.m[ti];
    auto& v = state.v[ti];
#pragma omp simd
    for (size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      T mhat = m[i] / bc1;
      T vhat = v[i] / bc2;
      p[i] -= step * mhat / (std::sqrt(vhat) + eps);
    }
    for (T pv : p)
      if (!std::isfinite(static_cast<double>(pv)))
        throw contract_error("adam_step: non-finite parameter after update in tensor " +
                             params.tensors[ti].name);
  }
}

}  // namespace knerf
