#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "knerf/metrics.hpp"
#include "knerf/rng.hpp"

using namespace knerf;

namespace {

ImageBuffer noise_image(int w, int h, uint64_t seed) {
  ImageBuffer img(w, h);
  Pcg32 rng(seed);
  for (auto& v : img.pixels) v = rng.uniform_f();
  return img;
}

ImageBuffer constant_image(int w, int h, float v) {
  ImageBuffer img(w, h);
  std::fill(img.pixels.begin(), img.pixels.end(), v);
  return img;
}

// Independent SSIM oracle: direct per-window double loops over the same
// 11x11 Gaussian, no separable filtering shared with the implementation.
double ssim_reference(const ImageBuffer& a, const ImageBuffer& b) {
  const int w = a.width, h = a.height, win = 11;
  const double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  std::vector<double> kernel(static_cast<size_t>(win) * win);
  double ksum = 0;
  for (int y = 0; y < win; ++y)
    for (int x = 0; x < win; ++x) {
      double dx = x - 5.0, dy = y - 5.0;
      kernel[static_cast<size_t>(y) * win + x] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      ksum += kernel[static_cast<size_t>(y) * win + x];
    }
  for (auto& v : kernel) v /= ksum;

  auto gray = [](const ImageBuffer& img, int x, int y) {
    const float* p = img.at(x, y);
    return (static_cast<double>(p[0]) + p[1] + p[2]) / 3.0;
  };

  double total = 0;
  int count = 0;
  for (int y0 = 0; y0 + win <= h; ++y0)
    for (int x0 = 0; x0 + win <= w; ++x0) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int y = 0; y < win; ++y)
        for (int x = 0; x < win; ++x) {
          double kw = kernel[static_cast<size_t>(y) * win + x];
          double gx = gray(a, x0 + x, y0 + y);
          double gy = gray(b, x0 + x, y0 + y);
          mx += kw * gx;
          my += kw * gy;
          sxx += kw * gx * gx;
          syy += kw * gy * gy;
          sxy += kw * gx * gy;
        }
      double vx = sxx - mx * mx, vy = syy - my * my, cov = sxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return total / count;
}

}  // namespace

TEST_CASE("mse_image: identity, extremes, naive loop oracle (seed 9)") {
  auto img = noise_image(16, 16, 1);
  CHECK(mse_image(img, img) == 0.0);
  CHECK(mse_image(constant_image(8, 8, 0.f), constant_image(8, 8, 1.f)) == 1.0);

  auto a = noise_image(13, 9, 9);
  auto b = noise_image(13, 9, 10);
  double naive = 0;
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 13; ++x)
      for (int c = 0; c < 3; ++c) {
        double d = static_cast<double>(a.at(x, y)[c]) - b.at(x, y)[c];
        naive += d * d;
      }
  naive /= 13 * 9 * 3;
  CHECK(std::abs(mse_image(a, b) - naive) <= 1e-9);

  CHECK_THROWS_AS(mse_image(constant_image(4, 4, 0.f), constant_image(5, 4, 0.f)),
                  contract_error);
}

TEST_CASE("mse is invariant under identical pixel permutations") {
  auto a = noise_image(8, 8, 21);
  auto b = noise_image(8, 8, 22);
  double base = mse_image(a, b);
  // Reverse both pixel arrays the same way.
  ImageBuffer ar = a, br = b;
  for (int i = 0; i < 8 * 8; ++i)
    for (int c = 0; c < 3; ++c) {
      ar.pixels[static_cast<size_t>(i) * 3 + c] = a.pixels[static_cast<size_t>(8 * 8 - 1 - i) * 3 + c];
      br.pixels[static_cast<size_t>(i) * 3 + c] = b.pixels[static_cast<size_t>(8 * 8 - 1 - i) * 3 + c];
    }
  CHECK(mse_image(ar, br) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("psnr: analytic values, sentinel, monotonicity, contract") {
  CHECK(psnr(0.01) == 20.0);
  CHECK(psnr(1e-3) == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(psnr(0.0) == 99.0);
  CHECK_THROWS_AS(psnr(-1e-9), contract_error);
  double prev = psnr(1e-6);
  for (double m : {1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
    double cur = psnr(m);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("ssim: identity, anti-correlation, window contract, symmetry") {
  auto img = noise_image(32, 32, 33);
  CHECK(ssim(img, img) == 1.0);

  // Binary image against its inverse is anti-correlated.
  ImageBuffer binary(32, 32);
  Pcg32 rng(5);
  for (size_t i = 0; i < binary.pixels.size(); i += 3) {
    float v = rng.uniform() < 0.5 ? 0.f : 1.f;
    binary.pixels[i] = binary.pixels[i + 1] = binary.pixels[i + 2] = v;
  }
  ImageBuffer inverse = binary;
  for (auto& v : inverse.pixels) v = 1.f - v;
  CHECK(ssim(binary, inverse) < 0.0);

  auto a = noise_image(24, 24, 40);
  auto b = noise_image(24, 24, 41);
  CHECK(std::abs(ssim(a, b) - ssim(b, a)) <= 1e-9);

  CHECK_THROWS_AS(ssim(constant_image(10, 10, 0.5f), constant_image(10, 10, 0.5f)),
                  contract_error);
}

TEST_CASE("ssim matches the independent reference implementation") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    auto a = noise_image(64, 64, 100 + seed);
    auto b = noise_image(64, 64, 200 + seed);
    CHECK(std::abs(ssim(a, b) - ssim_reference(a, b)) <= 1e-4);
    // Correlated pair: b = blend of a and noise.
    ImageBuffer blend = a;
    for (size_t i = 0; i < blend.pixels.size(); ++i)
      blend.pixels[i] = 0.7f * a.pixels[i] + 0.3f * b.pixels[i];
    CHECK(std::abs(ssim(a, blend) - ssim_reference(a, blend)) <= 1e-4);
  }
}

TEST_CASE("metric report table format") {
  std::vector<std::string> names = {"r_0", "r_1"};
  std::vector<ImageBuffer> rendered = {noise_image(16, 16, 1), noise_image(16, 16, 2)};
  std::vector<ImageBuffer> reference = {rendered[0], noise_image(16, 16, 3)};
  auto report = MetricReport::from_pairs(names, rendered, reference);
  CHECK(report.per_image[0].mse == 0.0);
  CHECK(report.per_image[0].psnr == 99.0);
  CHECK(report.per_image[0].ssim == 1.0);
  auto table = report.to_table();
  int lines = 0;
  for (char c : table)
    if (c == '\n') ++lines;
  CHECK(lines == 3);  // two images + mean
  CHECK(table.find("mean\t") != std::string::npos);
  CHECK(report.mean.psnr == doctest::Approx((report.per_image[0].psnr + report.per_image[1].psnr) / 2));
}
