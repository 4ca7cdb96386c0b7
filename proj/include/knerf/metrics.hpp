#pragma once

#include <string>
#include <vector>

#include "knerf/image.hpp"

namespace knerf {

// PSNR reported for an exact match (mse = 0); also the log cap.
inline constexpr double kPsnrCap = 99.0;

// Mean over all pixels and channels of the squared difference.
double mse_image(const ImageBuffer& a, const ImageBuffer& b);

// -10 log10(mse) for unit-range images; mse = 0 maps to the 99 dB sentinel.
double psnr(double mse);

// Mean local SSIM over an 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2,
// C2 = 0.03^2 on the [0,1] range, grayscale by channel mean, valid-region
// windows only. Images must be at least 11x11.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

struct MetricRow {
  std::string name;
  double mse = 0;
  double psnr = 0;
  double ssim = 0;
};

struct MetricReport {
  std::vector<MetricRow> per_image;
  MetricRow mean;  // name = "mean"

  static MetricReport from_pairs(const std::vector<std::string>& names,
                                 const std::vector<ImageBuffer>& rendered,
                                 const std::vector<ImageBuffer>& reference);
  // One tab-separated line per image plus the mean line.
  std::string to_table() const;
};

}  // namespace knerf
