#include "knerf/metrics.hpp"

#include <cmath>
#include <cstdio>

namespace knerf {

double mse_image(const ImageBuffer& a, const ImageBuffer& b) {
  KNERF_REQUIRE(a.width == b.width && a.height == b.height, "mse_image: dimension mismatch");
  KNERF_REQUIRE(a.width > 0 && a.height > 0, "mse_image: empty image");
  double sum = 0;
  for (size_t i = 0; i < a.pixels.size(); ++i) {
    double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.pixels.size());
}

double psnr(double mse) {
  KNERF_REQUIRE(mse >= 0, "psnr: negative mse");
  if (mse == 0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_kernel() {
  std::vector<double> k(kWindow);
  double sum = 0;
  for (int i = 0; i < kWindow; ++i) {
    double d = i - (kWindow - 1) / 2.0;
    k[static_cast<size_t>(i)] = std::exp(-d * d / (2 * kSigma * kSigma));
    sum += k[static_cast<size_t>(i)];
  }
  for (auto& v : k) v /= sum;
  return k;
}

std::vector<double> to_gray(const ImageBuffer& img) {
  std::vector<double> g(static_cast<size_t>(img.width) * img.height);
  for (size_t i = 0; i < g.size(); ++i)
    g[i] = (static_cast<double>(img.pixels[i * 3]) + img.pixels[i * 3 + 1] + img.pixels[i * 3 + 2]) / 3.0;
  return g;
}

// Separable valid-mode Gaussian filter: output is (w-10) x (h-10).
std::vector<double> gauss_valid(const std::vector<double>& img, int w, int h, int* ow, int* oh) {
  const auto k = gaussian_kernel();
  int w2 = w - kWindow + 1;
  std::vector<double> tmp(static_cast<size_t>(w2) * h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w2; ++x) {
      double s = 0;
      for (int i = 0; i < kWindow; ++i) s += k[static_cast<size_t>(i)] * img[static_cast<size_t>(y) * w + x + i];
      tmp[static_cast<size_t>(y) * w2 + x] = s;
    }
  int h2 = h - kWindow + 1;
  std::vector<double> out(static_cast<size_t>(w2) * h2, 0.0);
  for (int y = 0; y < h2; ++y)
    for (int x = 0; x < w2; ++x) {
      double s = 0;
      for (int i = 0; i < kWindow; ++i) s += k[static_cast<size_t>(i)] * tmp[static_cast<size_t>(y + i) * w2 + x];
      out[static_cast<size_t>(y) * w2 + x] = s;
    }
  *ow = w2;
  *oh = h2;
  return out;
}

}  // namespace

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
  KNERF_REQUIRE(a.width == b.width && a.height == b.height, "ssim: dimension mismatch");
  KNERF_REQUIRE(a.width >= kWindow && a.height >= kWindow,
                "ssim: image smaller than the 11x11 window");
  const int w = a.width, h = a.height;
  auto x = to_gray(a);
  auto y = to_gray(b);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  int ow = 0, oh = 0;
  auto mu_x = gauss_valid(x, w, h, &ow, &oh);
  auto mu_y = gauss_valid(y, w, h, &ow, &oh);
  auto s_xx = gauss_valid(xx, w, h, &ow, &oh);
  auto s_yy = gauss_valid(yy, w, h, &ow, &oh);
  auto s_xy = gauss_valid(xy, w, h, &ow, &oh);

  double total = 0;
  for (size_t i = 0; i < mu_x.size(); ++i) {
    double mx = mu_x[i], my = mu_y[i];
    double var_x = s_xx[i] - mx * mx;
    double var_y = s_yy[i] - my * my;
    double cov = s_xy[i] - mx * my;
    double num = (2 * mx * my + kC1) * (2 * cov + kC2);
    double den = (mx * mx + my * my + kC1) * (var_x + var_y + kC2);
    total += num / den;
  }
  return total / static_cast<double>(mu_x.size());
}

MetricReport MetricReport::from_pairs(const std::vector<std::string>& names,
                                      const std::vector<ImageBuffer>& rendered,
                                      const std::vector<ImageBuffer>& reference) {
  KNERF_REQUIRE(names.size() == rendered.size() && rendered.size() == reference.size(),
                "MetricReport: length mismatch");
  KNERF_REQUIRE(!names.empty(), "MetricReport: empty image set");
  MetricReport report;
  double sum_mse = 0, sum_psnr = 0, sum_ssim = 0;
  for (size_t i = 0; i < names.size(); ++i) {
    MetricRow row;
    row.name = names[i];
    row.mse = mse_image(rendered[i], reference[i]);
    row.psnr = psnr(row.mse);
    row.ssim = ssim(rendered[i], reference[i]);
    sum_mse += row.mse;
    sum_psnr += row.psnr;
    sum_ssim += row.ssim;
    report.per_image.push_back(std::move(row));
  }
  report.mean.name = "mean";
  double n = static_cast<double>(names.size());
  report.mean.mse = sum_mse / n;
  report.mean.psnr = sum_psnr / n;
  report.mean.ssim = sum_ssim / n;
  return report;
}

std::string MetricReport::to_table() const {
  std::string out;
  char line[256];
  for (const auto& row : per_image) {
    std::snprintf(line, sizeof(line), "%s\t%.8f\t%.4f\t%.6f\n", row.name.c_str(), row.mse,
                  row.psnr, row.ssim);
    out += line;
  }
  std::snprintf(line, sizeof(line), "%s\t%.8f\t%.4f\t%.6f\n", mean.name.c_str(), mean.mse,
                mean.psnr, mean.ssim);
  out += line;
  return out;
}

}  // namespace knerf
