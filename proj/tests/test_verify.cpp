#include <doctest.h>

#include <cmath>
#include <vector>

#include "sepsa/data.hpp"
#include "sepsa/optim.hpp"
#include "sepsa/rng.hpp"
#include "sepsa/verify.hpp"

using namespace sepsa;
using namespace sepsa::verify;

TEST_SUITE("verify") {

TEST_CASE("batch_ls_oracle examples") {
  // Near-interpolation with a huge prior gain.
  const Mat w = batch_ls_oracle(Mat{{2}}, Mat{{3}}, SpdMat::identity(1, 1e12), Mat(1, 1));
  CHECK(w(0, 0) == doctest::Approx(1.5).epsilon(1e-9));

  // Same quadratic as the scalar rls_step example: (1 - a)^2 + a^2.
  const Mat half = batch_ls_oracle(Mat{{1}}, Mat{{1}}, SpdMat::identity(1), Mat(1, 1));
  CHECK(half(0, 0) == doctest::Approx(0.5).epsilon(1e-15));

  // Orthonormal features: W -> H^T y per row.
  const Mat h{{1, 0}, {0, 1}, {0, 0}};
  const Mat y{{2, -1}, {3, 4}, {9, 9}};
  const Mat wo = batch_ls_oracle(h, y, SpdMat::identity(2, 1e10), Mat(2, 2));
  CHECK(linalg::max_abs_diff(wo, Mat{{2, 3}, {-1, 4}}) <= 1e-8);
}

TEST_CASE("batch_ls_oracle zeroes the gradient of its own objective") {
  Rng rng(41);
  const std::size_t n = 60, p = 7, d_o = 2;
  Mat h(n, p), y(n, d_o), w0(d_o, p);
  for (double& v : h.flat()) v = rng.normal();
  for (double& v : y.flat()) v = rng.normal();
  for (double& v : w0.flat()) v = rng.normal();
  const SpdMat b0(random_spd(41, p, 1e3), 1e-9);
  const Mat w = batch_ls_oracle(h, y, b0, w0);
  const Mat b0_inv = gauss_jordan_inverse(b0.mat());
  for (std::size_t r = 0; r < d_o; ++r) {
    // grad_r = H^T (H w_r - y_r) + B0^{-1} (w_r - w0_r)
    Vec grad(p);
    for (std::size_t i = 0; i < n; ++i) {
      double res = -y(i, r);
      for (std::size_t j = 0; j < p; ++j) res += h(i, j) * w(r, j);
      for (std::size_t j = 0; j < p; ++j) grad[j] += h(i, j) * res;
    }
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t k = 0; k < p; ++k) grad[j] += b0_inv(j, k) * (w(r, k) - w0(r, k));
    CHECK(linalg::max_abs(grad) <= 1e-8);
  }
}

TEST_CASE("batch_ls_oracle rejects a singular system") {
  // Collinear features and a negligible prior: H^T H + 1e-300 I rounds to rank one.
  CHECK_THROWS_AS(batch_ls_oracle(Mat{{1, 1}, {2, 2}}, Mat{{1}, {2}}, SpdMat::identity(2, 1e300),
                                  Mat(1, 2)),
                  linalg::NumericalError);
}

TEST_CASE("fd_gradient") {
  const auto quad = [](std::span<const double> x) { return 0.5 * x[0] * x[0]; };
  CHECK(std::abs(fd_gradient(quad, Vec{3}, 1e-6)[0] - 3.0) <= 1e-8);

  const auto constant = [](std::span<const double>) { return 4.0; };
  CHECK(fd_gradient(constant, Vec{1, 2, 3}, 1e-6) == Vec(3));

  Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    Vec a(5);
    for (double& v : a) v = 3 * rng.normal();
    const auto q = [](std::span<const double> x) {
      double s = 0;
      for (std::size_t i = 0; i < x.size(); ++i) s += 0.5 * (i + 1) * x[i] * x[i] + x[i];
      return s;
    };
    const Vec g = fd_gradient(q, a, 1e-6);
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(g[i] - ((i + 1) * a[i] + 1)) <= 1e-8);
  }
}

TEST_CASE("relative_error") {
  CHECK(relative_error(Vec{0, 0}, Vec{0, 0}) == 0.0);
  CHECK(relative_error(Vec{1, 0}, Vec{0, 0}) == 1.0);
  CHECK(relative_error(Vec{3, 4}, Vec{3, 4}) == 0.0);
}

TEST_CASE("gradient_check passes on random instances") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = model::init_kaiming_uniform({3, 4, 2}, seed);
    Rng rng(seed);
    model::Sample s{Vec(3), Vec(2)};
    for (double& v : s.x) v = rng.normal();
    for (double& v : s.y) v = rng.normal();
    CHECK(gradient_check(m, s).pass);
  }
}

TEST_CASE("grad_norm_trace") {
  const auto synth = data::gen_synthetic({4, 5, 1, 200, 0.0, 6});
  std::vector<Snapshot> snaps;
  snaps.push_back({0, synth.planted});
  snaps.push_back({1, model::init_kaiming_uniform({4, 5, 1}, 99)});
  const auto trace = grad_norm_trace(snaps, synth.data.samples);
  REQUIRE(trace.size() == 2);
  CHECK(trace[0].k == 0);
  CHECK(trace[0].norm <= 1e-9);
  CHECK(trace[1].norm > 0.0);

  // Norm covers both blocks.
  const auto full = model::full_objective_and_grad(snaps[1].model, synth.data.samples);
  const double expect = std::hypot(linalg::norm2(full.grad_head.flat()), linalg::norm2(full.grad_theta));
  CHECK(trace[1].norm == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("oracle reports") {
  const auto r = make_report("x", 0.5, 1.0, "i");
  CHECK(r.pass);
  CHECK_FALSE(make_report("x", 1.5, 1.0, "i").pass);
  CHECK_FALSE(make_report("x", NAN, 1.0, "i").pass);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CHECK(sherman_morrison_check(seed, 1 + seed * 2, 1e6).pass);
  }
}

TEST_CASE("reports are deterministic") {
  const auto a = run_default_suite(5);
  const auto b = run_default_suite(5);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].max_abs_error == b[i].max_abs_error);
    CHECK(a[i].instance == b[i].instance);
    CHECK(a[i].pass);
  }
}

TEST_CASE("random_spd has the requested spectrum bounds") {
  const Mat a = random_spd(3, 6, 1e4);
  CHECK(linalg::assert_spd(a, 1e-9));
  const Mat inv = gauss_jordan_inverse(a);
  const Mat id = linalg::matmul(a, inv);
  CHECK(linalg::max_abs_diff(id, Mat::identity(6)) <= 1e-8);
}

}  // TEST_SUITE
