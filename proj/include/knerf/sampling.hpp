#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "knerf/common.hpp"
#include "knerf/rng.hpp"

namespace knerf {

// n points partitioning [t_near, t_far] into equal bins: bin midpoints when
// jitter is off, uniform within each bin when on.
template <typename T>
void sample_stratified(T t_near, T t_far, int n, bool jitter, Pcg32& rng, T* out) {
  KNERF_REQUIRE(n >= 2, "sample_stratified: need n >= 2");
  KNERF_REQUIRE(t_near < t_far, "sample_stratified: t_near must be < t_far");
  T span = (t_far - t_near) / static_cast<T>(n);
  for (int i = 0; i < n; ++i) {
    T u = jitter ? static_cast<T>(rng.uniform()) : T(0.5);
    out[i] = t_near + span * (static_cast<T>(i) + u);
  }
}

inline constexpr double kImportanceFloor = 1e-5;

// Inverse-CDF draws from the piecewise-constant density proportional to
// weights + floor over n_bins bins with the given edges. u values are
// stratified when jittered and midpoints otherwise, so the output is sorted.
template <typename T>
void sample_importance(const T* bin_edges, int n_bins, const T* weights, int n_fine, bool jitter,
                       Pcg32& rng, T* out) {
  KNERF_REQUIRE(n_bins >= 2, "sample_importance: need at least 2 bins");
  for (int b = 0; b < n_bins; ++b)
    KNERF_REQUIRE(weights[b] >= T(0), "sample_importance: negative weight");

  std::vector<T> cdf(static_cast<size_t>(n_bins) + 1);
  cdf[0] = T(0);
  for (int b = 0; b < n_bins; ++b)
    cdf[static_cast<size_t>(b) + 1] =
        cdf[static_cast<size_t>(b)] + weights[b] + static_cast<T>(kImportanceFloor);
  T total = cdf.back();
  for (auto& c : cdf) c /= total;

  int b = 0;
  for (int i = 0; i < n_fine; ++i) {
    T u = (static_cast<T>(i) + (jitter ? static_cast<T>(rng.uniform()) : T(0.5))) /
          static_cast<T>(n_fine);
    while (b + 1 < n_bins && cdf[static_cast<size_t>(b) + 1] <= u) ++b;
    T c0 = cdf[static_cast<size_t>(b)], c1 = cdf[static_cast<size_t>(b) + 1];
    T frac = c1 > c0 ? (u - c0) / (c1 - c0) : T(0.5);
    out[i] = bin_edges[b] + frac * (bin_edges[b + 1] - bin_edges[b]);
  }
}

// Merges two sorted runs and enforces strictly increasing t values (equal or
// inverted floats are bumped by one ulp) so all deltas stay positive.
template <typename T>
void merge_sorted_strict(const T* a, int na, const T* b, int nb, T* out) {
  int i = 0, j = 0, k = 0;
  while (i < na || j < nb) {
    T v;
    if (j >= nb || (i < na && a[i] <= b[j]))
      v = a[i++];
    else
      v = b[j++];
    if (k > 0 && v <= out[k - 1]) v = std::nextafter(out[k - 1], std::numeric_limits<T>::max());
    out[k++] = v;
  }
}

}  // namespace knerf
