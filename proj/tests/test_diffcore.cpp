#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <vector>

#include "knerf/activations.hpp"
#include "knerf/gradcheck.hpp"
#include "knerf/linalg.hpp"
#include "knerf/rng.hpp"
#include "knerf/tensor.hpp"

using namespace knerf;

namespace {

std::vector<double> random_vec(Pcg32& rng, int n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(static_cast<size_t>(n));
  for (auto& x : v) x = rng.uniform_in(lo, hi);
  return v;
}

// Independent oracle: naive triple-indexed matrix-vector product.
std::vector<double> matvec_oracle(const std::vector<double>& w, int rows, int cols,
                                  const std::vector<double>& x, const std::vector<double>& b) {
  std::vector<double> y(static_cast<size_t>(rows), 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      y[static_cast<size_t>(r)] += w[static_cast<size_t>(r) * cols + c] * x[static_cast<size_t>(c)];
    }
    y[static_cast<size_t>(r)] += b[static_cast<size_t>(r)];
  }
  return y;
}

}  // namespace

TEST_CASE("affine_forward identity and bias") {
  std::vector<double> x{1, 2};
  std::vector<double> eye{1, 0, 0, 1};
  auto y = affine_forward(x, eye, 2, 2, std::vector<double>{0, 0});
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 2.0);
  y = affine_forward(x, eye, 2, 2, std::vector<double>{1, 1});
  CHECK(y[0] == 2.0);
  CHECK(y[1] == 3.0);
}

TEST_CASE("affine_forward matches naive loop oracle (seed 7, 5->3)") {
  Pcg32 rng(7);
  auto x = random_vec(rng, 5);
  auto w = random_vec(rng, 15);
  auto b = random_vec(rng, 3);
  auto got = affine_forward(x, w, 3, 5, b);
  auto want = matvec_oracle(w, 3, 5, x, b);
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(got[static_cast<size_t>(i)] - want[static_cast<size_t>(i)]) <=
          1e-6 * std::max(1.0, std::abs(want[static_cast<size_t>(i)])));
}

TEST_CASE("affine_forward dimension mismatch throws") {
  std::vector<double> x{1, 2, 3};
  std::vector<double> eye{1, 0, 0, 1};
  CHECK_THROWS_AS((void)affine_forward(x, eye, 2, 2, std::vector<double>{0, 0}), contract_error);
  CHECK_THROWS_AS((void)affine_forward(std::vector<double>{1, 2}, eye, 2, 2,
                                       std::vector<double>{0, 0, 0}),
                  contract_error);
}

TEST_CASE("affine_backward trivial cases") {
  std::vector<double> x{0.5, -0.25};
  std::vector<double> eye{1, 0, 0, 1};
  auto zero = affine_backward(x, eye, 2, 2, std::vector<double>{0, 0});
  for (double v : zero.dx) CHECK(v == 0.0);
  for (double v : zero.dw) CHECK(v == 0.0);
  for (double v : zero.db) CHECK(v == 0.0);

  std::vector<double> g{0.7, -1.3};
  auto ident = affine_backward(x, eye, 2, 2, g);
  CHECK(ident.dx[0] == g[0]);
  CHECK(ident.dx[1] == g[1]);
}

TEST_CASE("affine_backward matches central finite differences (seed 11)") {
  Pcg32 rng(11);
  const int rows = 3, cols = 5;
  auto x = random_vec(rng, cols);
  auto w = random_vec(rng, rows * cols);
  auto b = random_vec(rng, rows);
  auto dy = random_vec(rng, rows);
  auto g = affine_backward(x, w, rows, cols, dy);

  const double eps = 1e-4;
  auto scalar_loss = [&](const std::vector<double>& xx, const std::vector<double>& ww,
                         const std::vector<double>& bb) {
    auto y = affine_forward(xx, ww, rows, cols, bb);
    double s = 0;
    for (int r = 0; r < rows; ++r) s += y[static_cast<size_t>(r)] * dy[static_cast<size_t>(r)];
    return s;
  };
  auto check_rel = [&](double analytic, double numeric) {
    double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    CHECK(std::abs(analytic - numeric) / denom <= 1e-5);
  };

  for (int i = 0; i < cols; ++i) {
    auto xp = x, xm = x;
    xp[static_cast<size_t>(i)] += eps;
    xm[static_cast<size_t>(i)] -= eps;
    check_rel(g.dx[static_cast<size_t>(i)],
              (scalar_loss(xp, w, b) - scalar_loss(xm, w, b)) / (2 * eps));
  }
  for (size_t i = 0; i < w.size(); ++i) {
    auto wp = w, wm = w;
    wp[i] += eps;
    wm[i] -= eps;
    check_rel(g.dw[i], (scalar_loss(x, wp, b) - scalar_loss(x, wm, b)) / (2 * eps));
  }
  for (size_t i = 0; i < b.size(); ++i) {
    auto bp = b, bm = b;
    bp[i] += eps;
    bm[i] -= eps;
    check_rel(g.db[i], (scalar_loss(x, w, bp) - scalar_loss(x, w, bm)) / (2 * eps));
  }
}

TEST_CASE("adjoint consistency of affine forward/backward") {
  Pcg32 rng(21);
  const int rows = 6, cols = 4;
  auto w = random_vec(rng, rows * cols);
  auto x0 = random_vec(rng, cols);
  std::vector<double> zero_b(rows, 0.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto dx_in = random_vec(rng, cols);
    auto dy = random_vec(rng, rows);
    // Linearization of affine in x is W itself: <dy, W dx_in> == <W^T dy, dx_in>.
    auto fwd = affine_forward(dx_in, w, rows, cols, zero_b);
    auto bwd = affine_backward(x0, w, rows, cols, dy);
    double lhs = 0, rhs = 0;
    for (int r = 0; r < rows; ++r) lhs += dy[static_cast<size_t>(r)] * fwd[static_cast<size_t>(r)];
    for (int c = 0; c < cols; ++c) rhs += bwd.dx[static_cast<size_t>(c)] * dx_in[static_cast<size_t>(c)];
    CHECK(std::abs(lhs - rhs) <= 1e-6 * std::max({std::abs(lhs), std::abs(rhs), 1.0}));
  }
}

TEST_CASE("activations: analytic values") {
  double x[2] = {-1, 2}, y[2];
  act_forward(Activation::relu, x, y, 2);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 2.0);
  double z = 0, s;
  act_forward(Activation::sigmoid, &z, &s, 1);
  CHECK(s == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("sigmoid backward matches finite differences (seed 3)") {
  Pcg32 rng(3);
  const int n = 16;
  auto x = random_vec(rng, n, -3.0, 3.0);
  auto dy = random_vec(rng, n);
  std::vector<double> dx(static_cast<size_t>(n));
  act_backward(Activation::sigmoid, x.data(), dy.data(), dx.data(), n);
  const double eps = 1e-6;
  for (int i = 0; i < n; ++i) {
    double xp = x[static_cast<size_t>(i)] + eps, xm = x[static_cast<size_t>(i)] - eps;
    double sp, sm;
    act_forward(Activation::sigmoid, &xp, &sp, 1);
    act_forward(Activation::sigmoid, &xm, &sm, 1);
    double numeric = dy[static_cast<size_t>(i)] * (sp - sm) / (2 * eps);
    double denom = std::max({std::abs(dx[static_cast<size_t>(i)]), std::abs(numeric), 1e-8});
    CHECK(std::abs(dx[static_cast<size_t>(i)] - numeric) / denom <= 1e-5);
  }
}

TEST_CASE("grad_check: quadratic and constant functions") {
  ParamSet<double> params;
  int idx = params.add("theta", {5});
  Pcg32 rng(99);
  for (auto& v : params.at(idx).data) v = rng.uniform_in(-2, 2);

  auto quad_value = [](const ParamSet<double>& p) {
    double s = 0;
    for (double v : p.tensors[0].data) s += v * v;
    return s;
  };
  auto quad_grad = [](const ParamSet<double>& p, GradientStore<double>& g) {
    for (size_t i = 0; i < p.tensors[0].data.size(); ++i) g.of(0)[i] = 2 * p.tensors[0].data[i];
  };
  auto rep = grad_check<double>(quad_value, quad_grad, params, 1e-5);
  CHECK(rep.max_relative_error <= 1e-7);

  auto const_value = [](const ParamSet<double>&) { return 3.25; };
  auto const_grad = [](const ParamSet<double>&, GradientStore<double>&) {};
  rep = grad_check<double>(const_value, const_grad, params, 1e-5);
  CHECK(rep.max_relative_error <= 1e-7);
}

TEST_CASE("grad_check reports the offending parameter on non-finite values") {
  ParamSet<double> params;
  params.add("bad", {2});
  auto value = [](const ParamSet<double>& p) {
    return 1.0 / (p.tensors[0].data[0] - p.tensors[0].data[0]) * 0.0 + std::nan("");
  };
  auto grad = [](const ParamSet<double>&, GradientStore<double>&) {};
  try {
    grad_check<double>(value, grad, params, 1e-5);
    CHECK(false);
  } catch (const contract_error& e) {
    CHECK(std::string(e.what()).find("bad") != std::string::npos);
  }
}

TEST_CASE("batched kernels agree with single-vector ops and are thread-count invariant") {
  Pcg32 rng(1234);
  const int batch = 257, in_dim = 19, out_dim = 13;
  std::vector<double> x(static_cast<size_t>(batch) * in_dim), w(static_cast<size_t>(out_dim) * in_dim),
      b(out_dim), dy(static_cast<size_t>(batch) * out_dim);
  for (auto& v : x) v = rng.uniform_in(-1, 1);
  for (auto& v : w) v = rng.uniform_in(-1, 1);
  for (auto& v : b) v = rng.uniform_in(-1, 1);
  for (auto& v : dy) v = rng.uniform_in(-1, 1);

  std::vector<double> y(static_cast<size_t>(batch) * out_dim);
  affine_forward_batch(x.data(), batch, in_dim, out_dim, w.data(), b.data(), y.data());
  for (int i : {0, 100, batch - 1}) {
    std::vector<double> xi(x.begin() + static_cast<int64_t>(i) * in_dim,
                           x.begin() + static_cast<int64_t>(i + 1) * in_dim);
    auto yi = affine_forward(xi, w, out_dim, in_dim, b);
    for (int o = 0; o < out_dim; ++o)
      CHECK(y[static_cast<size_t>(i) * out_dim + o] == doctest::Approx(yi[static_cast<size_t>(o)]).epsilon(1e-12));
  }

  std::vector<double> dx(static_cast<size_t>(batch) * in_dim);
  affine_backward_input_batch(dy.data(), batch, in_dim, out_dim, w.data(), dx.data());

  std::vector<double> dw1(w.size(), 0.0), db1(b.size(), 0.0);
  std::vector<double> dw2(w.size(), 0.0), db2(b.size(), 0.0);
  int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  affine_backward_param_batch(x.data(), dy.data(), batch, in_dim, out_dim, dw1.data(), db1.data());
  omp_set_num_threads(std::max(2, saved));
  affine_backward_param_batch(x.data(), dy.data(), batch, in_dim, out_dim, dw2.data(), db2.data());
  omp_set_num_threads(saved);
  CHECK(dw1 == dw2);
  CHECK(db1 == db2);

  // Spot check against the single-vector backward summed over the batch.
  std::vector<double> dw_ref(w.size(), 0.0);
  for (int i = 0; i < batch; ++i) {
    std::vector<double> xi(x.begin() + static_cast<int64_t>(i) * in_dim,
                           x.begin() + static_cast<int64_t>(i + 1) * in_dim);
    std::vector<double> dyi(dy.begin() + static_cast<int64_t>(i) * out_dim,
                            dy.begin() + static_cast<int64_t>(i + 1) * out_dim);
    auto g = affine_backward(xi, w, out_dim, in_dim, dyi);
    for (size_t k = 0; k < w.size(); ++k) dw_ref[k] += g.dw[k];
    for (int o = 0; o < out_dim; ++o) {
      double got = dx[static_cast<size_t>(i) * in_dim];
      (void)got;
      CHECK(dx[static_cast<size_t>(i) * in_dim + 0] == doctest::Approx(g.dx[0]).epsilon(1e-12));
    }
  }
  for (size_t k = 0; k < w.size(); ++k)
    CHECK(dw1[k] == doctest::Approx(dw_ref[k]).epsilon(1e-9));
}

TEST_CASE("operations are pure: repeated calls bitwise identical") {
  Pcg32 rng(5);
  auto x = random_vec(rng, 8);
  auto w = random_vec(rng, 48);
  auto b = random_vec(rng, 6);
  auto y1 = affine_forward(x, w, 6, 8, b);
  auto y2 = affine_forward(x, w, 6, 8, b);
  CHECK(y1 == y2);
}

TEST_CASE("ParamTensor invariants") {
  ParamTensor<float> t("w", {3, 4});
  CHECK(t.size() == 12);
  CHECK(t.all_finite());
  CHECK_THROWS_AS(ParamTensor<float>("bad", {0, 2}), contract_error);

  ParamSet<float> ps;
  ps.add("a", {2, 2});
  GradientStore<float> g(ps);
  g.of(0)[0] = 1.0f;
  g.zero();
  CHECK(g.of(0)[0] == 0.0f);
  g.check_congruent(ps);
}
