#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "knerf/tensor.hpp"

namespace knerf {

template <typename T>
struct GradCheckReport {
  T max_relative_error = T(0);
  std::string worst_tensor;
  int64_t worst_index = -1;
  T analytic_at_worst = T(0);
  T numeric_at_worst = T(0);
};

// Central-difference verification of an analytic gradient. `value` must be
// a pure function of the parameter set; `analytic` writes the gradient of
// `value` at `params` into a GradientStore. Relative error per scalar is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
template <typename T>
GradCheckReport<T> grad_check(const std::function<T(const ParamSet<T>&)>& value,
                              const std::function<void(const ParamSet<T>&, GradientStore<T>&)>& analytic,
                              ParamSet<T> params, T eps) {
  KNERF_REQUIRE(eps > T(0), "grad_check: eps must be positive");

  GradientStore<T> grads(params);
  analytic(params, grads);

  GradCheckReport<T> report;
  for (size_t t = 0; t < params.tensors.size(); ++t) {
    auto& tensor = params.tensors[t];
    for (size_t i = 0; i < tensor.data.size(); ++i) {
      T saved = tensor.data[i];
      tensor.data[i] = saved + eps;
      T f_plus = value(params);
      tensor.data[i] = saved - eps;
      T f_minus = value(params);
      tensor.data[i] = saved;
      if (!std::isfinite(static_cast<double>(f_plus)) ||
          !std::isfinite(static_cast<double>(f_minus))) {
        throw contract_error("grad_check: non-finite value perturbing " + tensor.name + "[" +
                             std::to_string(i) + "]");
      }
      T numeric = (f_plus - f_minus) / (T(2) * eps);
      T an = grads.of(static_cast<int>(t))[i];
      T denom = std::max({std::abs(an), std::abs(numeric), T(1e-8)});
      T rel = std::abs(an - numeric) / denom;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_tensor = tensor.name;
        report.worst_index = static_cast<int64_t>(i);
        report.analytic_at_worst = an;
        report.numeric_at_worst = numeric;
      }
    }
  }
  return report;
}

}  // namespace knerf
