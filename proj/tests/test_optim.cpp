#include <doctest.h>

#include <cmath>
#include <vector>

#include "sepsa/optim.hpp"
#include "sepsa/rng.hpp"
#include "sepsa/verify.hpp"

using namespace sepsa;
using namespace sepsa::optim;
using model::Sample;
using model::SeparableModel;

namespace {

Sample random_sample(Rng& rng, std::size_t d, std::size_t d_o) {
  Sample s{Vec(d), Vec(d_o)};
  for (double& v : s.x) v = rng.normal();
  for (double& v : s.y) v = rng.normal();
  return s;
}

model::Batch as_batch(const std::vector<Sample>& samples) {
  return model::Batch(samples.begin(), samples.end());
}

double residual(const SeparableModel& m, const Sample& s, std::size_t o) {
  return s.y[o] - model::forward(m, s.x).yhat[o];
}

}  // namespace

TEST_SUITE("optim") {

TEST_CASE("rls_step examples") {
  SUBCASE("scalar regularized fit") {
    RlsState st = RlsState::with_scale(1, 1.0);
    Mat w(1, 1);
    rls_step(st, w, Vec{1}, Vec{1}, Vec{0});
    CHECK(st.b(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(w(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("zero residual still downdates") {
    RlsState st = RlsState::with_scale(2, 1.0);
    Mat w{{0.3, -0.2}};
    const Mat before = w;
    rls_step(st, w, Vec{1, 1}, Vec{0.1}, Vec{0.1});
    CHECK(w == before);
    CHECK(st.b(0, 0) < 1.0);
  }
  SUBCASE("zero features change nothing") {
    RlsState st = RlsState::with_scale(2, 3.0);
    const SpdMat b0 = st.b;
    Mat w{{0.3, -0.2}};
    const Mat before = w;
    rls_step(st, w, Vec{0, 0}, Vec{5}, Vec{0});
    CHECK(w == before);
    CHECK(st.b == b0);
  }
  SUBCASE("non-finite input names the iteration") {
    RlsState st = RlsState::with_scale(1, 1.0);
    Mat w(1, 1);
    rls_step(st, w, Vec{1}, Vec{1}, Vec{0});
    try {
      rls_step(st, w, Vec{1}, Vec{INFINITY}, Vec{0});
      FAIL("expected NumericalError");
    } catch (const linalg::NumericalError& e) {
      CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
  }
}

TEST_CASE("rls_step never increases the residual on its sample") {
  Rng rng(4);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto m = model::init_kaiming_uniform({4, 6, 3}, seed);
    RlsState st = RlsState::with_scale(m.feature_dim(), 10.0);
    for (int t = 0; t < 10; ++t) {
      const Sample s = random_sample(rng, 4, 3);
      std::vector<double> before(3);
      for (std::size_t o = 0; o < 3; ++o) before[o] = std::abs(residual(m, s, o));
      rls_step(st, m, s);
      for (std::size_t o = 0; o < 3; ++o) CHECK(std::abs(residual(m, s, o)) <= before[o] + 1e-12);
    }
  }
}

TEST_CASE("gain stays SPD and below B0 along a run") {
  Rng rng(8);
  auto m = model::init_kaiming_uniform({5, 10, 2}, 8);
  RlsState st = RlsState::with_scale(m.feature_dim(), 100.0);
  for (int t = 0; t < 500; ++t) {
    rls_step(st, m, random_sample(rng, 5, 2));
    REQUIRE(linalg::assert_spd(st.b.mat(), 1e-12));
    for (std::size_t i = 0; i < st.b.size(); ++i) REQUIRE(st.b(i, i) <= 100.0);
  }
}

TEST_CASE("newton_step examples") {
  SUBCASE("zero step") {
    NewtonState st = NewtonState::with_scale(2, 1.0);
    const SpdMat h0 = st.h_hat;
    Mat w{{1, 2}};
    newton_step(st, w, Vec{1, 1}, Vec{3}, Vec{0}, 0.0);
    CHECK(w == Mat{{1, 2}});
    CHECK(st.h_hat == h0);
  }
  SUBCASE("scalar substitution") {
    NewtonState st = NewtonState::with_scale(1, 1.0);
    Mat w(1, 1);
    newton_step(st, w, Vec{1}, Vec{1}, Vec{0}, 1.0);
    CHECK(st.h_hat(0, 0) == 1.0);
    CHECK(w(0, 0) == 1.0);
  }
  SUBCASE("losing definiteness is reported") {
    NewtonState st = NewtonState::with_scale(2, 1.0);
    Mat w(1, 2);
    CHECK_THROWS_AS(newton_step(st, w, Vec{1, 0}, Vec{1}, Vec{0}, 1.0), linalg::NumericalError);
  }
}

TEST_CASE("RLS and stochastic Newton trajectories coincide") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = verify::trajectory_equivalence(seed, 1 + seed % 10, 200, 1 + seed % 3, 1e-8);
    CHECK_MESSAGE(r.pass, r.instance << " err " << r.max_abs_error);
  }
  const auto scalar = verify::trajectory_equivalence(99, 1, 50, 1, 1e-8);
  CHECK(scalar.pass);

  Mat w0{{0.5, -1, 2}};
  const auto stream = verify::random_head_stream(7, 3, 1, 40, w0, /*zero_residual=*/true);
  const auto flat = verify::trajectory_equivalence(stream, w0, 10.0, 1e-12);
  CHECK(flat.pass);
}

TEST_CASE("one RLS pass equals the regularized least-squares solution") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = verify::rls_oracle_check(seed, 50 + 40 * seed, 2 + 3 * seed, 1 + seed % 3, 1e-7);
    CHECK_MESSAGE(r.pass, r.instance << " err " << r.max_abs_error);
  }
}

TEST_CASE("theta updaters leave theta alone for zero gradients") {
  for (auto kind : {ThetaKind::Sgd, ThetaKind::Nag, ThetaKind::RmsProp, ThetaKind::Adam}) {
    ThetaUpdater u(kind, 3);
    const Vec theta{1, -2, 3};
    CHECK(theta_step(u, theta, Vec(3), 0.1) == theta);
  }
}

TEST_CASE("SGD step") {
  ThetaUpdater u(ThetaKind::Sgd, 1);
  CHECK(theta_step(u, Vec{1}, Vec{2}, 0.1)[0] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("Adam first step moves by beta in the sign direction") {
  ThetaUpdater u(ThetaKind::Adam, 3);
  const Vec g{0.3, -4, 1e-3};
  const Vec out = theta_step(u, Vec{0, 0, 0}, g, 0.01);
  for (std::size_t i = 0; i < 3; ++i) {
    const double expect = -0.01 * g[i] / (std::abs(g[i]) + 1e-8);
    CHECK(out[i] == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(u.timestep() == 1);
}

TEST_CASE("updaters follow their textbook recursions") {
  Rng rng(31);
  const std::size_t n = 4;
  const double beta = 0.05, mu = 0.9, rho = 0.9, eps = 1e-8, b1 = 0.9, b2 = 0.999;
  ThetaUpdater nag(ThetaKind::Nag, n), rms(ThetaKind::RmsProp, n), adam(ThetaKind::Adam, n);
  Vec t_nag(n), t_rms(n), t_adam(n);
  std::vector<double> v(n, 0), s(n, 0), m(n, 0), q(n, 0);
  Vec r_nag(n), r_rms(n), r_adam(n);
  for (int k = 1; k <= 25; ++k) {
    Vec g(n);
    for (double& x : g) x = rng.normal();
    nag.step(t_nag, g, beta);
    rms.step(t_rms, g, beta);
    adam.step(t_adam, g, beta);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = mu * v[i] + g[i];
      r_nag[i] -= beta * (g[i] + mu * v[i]);
      s[i] = rho * s[i] + (1 - rho) * g[i] * g[i];
      r_rms[i] -= beta * g[i] / (std::sqrt(s[i]) + eps);
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      q[i] = b2 * q[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, k)), qh = q[i] / (1 - std::pow(b2, k));
      r_adam[i] -= beta * mh / (std::sqrt(qh) + eps);
    }
  }
  CHECK(linalg::max_abs_diff(t_nag, r_nag) <= 1e-12);
  CHECK(linalg::max_abs_diff(t_rms, r_rms) <= 1e-12);
  CHECK(linalg::max_abs_diff(t_adam, r_adam) <= 1e-12);
  CHECK(adam.timestep() == 25);
}

TEST_CASE("schedules") {
  const auto c = StepSchedule::constant(1e-3);
  for (std::uint64_t k : {1u, 7u, 100000u}) {
    CHECK(c.next(k).gamma == 1e-3);
    CHECK(c.next(k).beta == 1e-3);
  }
  const auto d = StepSchedule::decaying(1.0, 1.0, 1.0);
  CHECK(d.eta(1) == 0.5);
  const auto scaled = StepSchedule::decaying(1.0, 1.0, 1.0, 2.0, 0.5);
  CHECK(scaled.next(1).gamma == 1.0);
  CHECK(scaled.next(1).beta == 0.25);

  CHECK_THROWS(StepSchedule::decaying(1.0, 1.0, 0.5));
  CHECK_THROWS(StepSchedule::decaying(1.0, 1.0, 1.1));
  CHECK_THROWS(StepSchedule::constant(0.0));
}

TEST_CASE("decaying schedule: divergent sum, convergent sum of squares") {
  // eta_k = 1/(1+k). Integral test: sum_{k=1}^N eta_k >= ln((N+2)/2);
  // sum eta_k^2 <= pi^2/6 - 1.
  const auto d = StepSchedule::decaying(1.0, 1.0, 1.0);
  double s1 = 0, s2 = 0;
  const std::uint64_t n = 1000000;
  for (std::uint64_t k = 1; k <= n; ++k) {
    const double e = d.eta(k);
    s1 += e;
    s2 += e * e;
  }
  CHECK(s1 >= std::log((n + 2.0) / 2.0));
  CHECK(s2 <= M_PI * M_PI / 6.0 - 1.0 + 1e-12);
  CHECK(s2 >= M_PI * M_PI / 6.0 - 1.0 - 1.0 / (n + 1.0));
}

TEST_CASE("batch_decay_count") {
  CHECK(batch_decay_count(1, 32) == 32);
  CHECK(batch_decay_count(2, 32) == 16);
  CHECK(batch_decay_count(3, 31) == 8);
  CHECK(batch_decay_count(10, 32) == 1);
  CHECK(batch_decay_count(200, 64) == 1);
}

TEST_CASE("sepsa_step on a perfectly fitted sample only downdates the gain") {
  auto m = model::init_kaiming_uniform({3, 4, 1}, 2);
  const Vec x{0.1, 0.5, -0.3};
  const std::vector<Sample> batch{{x, model::forward(m, x).yhat}};
  const auto theta0 = Vec::from(m.theta());
  const Mat head0 = m.head();
  auto opt = SepsaOptimizer::make(m, ThetaKind::Sgd, StepSchedule::constant(0.1));
  sepsa_step(opt, m, as_batch(batch));
  CHECK(linalg::max_abs_diff(m.theta(), theta0) == 0.0);
  CHECK(linalg::max_abs_diff(m.head(), head0) == 0.0);
  CHECK(std::get<RlsState>(opt.head_state()).b(0, 0) < kDefaultGainScale);
}

TEST_CASE("sepsa_step reduces the residual on a repeated sample") {
  Rng rng(12);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto m = model::init_kaiming_uniform({3, 5, 1}, seed);
    const Sample s = random_sample(rng, 3, 1);
    const std::vector<Sample> batch{s, s};
    const double before = std::abs(residual(m, s, 0));
    auto opt = SepsaOptimizer::make(m, ThetaKind::Sgd, StepSchedule::constant(1e-3));
    sepsa_step(opt, m, as_batch(batch));
    CHECK(std::abs(residual(m, s, 0)) < before);
  }
}

TEST_CASE("sepsa_step is Gauss-Seidel: head first, extractor gradient at the new head") {
  Rng rng(17);
  const auto m0 = model::init_kaiming_uniform({4, 6, 2}, 17);
  std::vector<Sample> samples;
  for (int i = 0; i < 5; ++i) samples.push_back(random_sample(rng, 4, 2));
  const double lr = 0.05;

  // Hand-assembled reference.
  auto ref = m0;
  RlsState st = RlsState::with_scale(ref.feature_dim(), kDefaultGainScale);
  for (const auto& s : samples) {
    const auto f = model::forward(ref, s.x);
    rls_step(st, ref.head(), f.h, s.y, f.yhat);
  }
  Vec grad(ref.theta_size());
  for (const auto& s : samples) {
    const Vec g = model::grad_theta(ref, s);
    for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i] / samples.size();
  }
  for (std::size_t i = 0; i < grad.size(); ++i) ref.theta()[i] -= lr * grad[i];

  auto m = m0;
  SepsaOptions opts;
  opts.batch_decay = false;
  auto opt = SepsaOptimizer::make(m, ThetaKind::Sgd, StepSchedule::constant(lr), kDefaultGainScale, opts);
  opt.step(m, as_batch(samples));
  CHECK(linalg::max_abs_diff(m.theta(), ref.theta()) <= 1e-14);
  CHECK(linalg::max_abs_diff(m.head(), ref.head()) <= 1e-14);

  // Swapped order gives a different trajectory.
  auto swapped = m0;
  auto opt2 = SepsaOptimizer::make(swapped, ThetaKind::Sgd, StepSchedule::constant(lr), kDefaultGainScale, opts);
  opt2.update_extractor(swapped, as_batch(samples));
  opt2.update_head(swapped, as_batch(samples), 1);
  CHECK(linalg::max_abs_diff(swapped.theta(), m.theta()) > 1e-6);
}

TEST_CASE("mini-batch RLS uses the decayed subset") {
  Rng rng(3);
  std::vector<Sample> samples;
  for (int i = 0; i < 32; ++i) samples.push_back(random_sample(rng, 2, 1));
  auto m = model::init_kaiming_uniform({2, 3, 1}, 3);
  auto opt = SepsaOptimizer::make(m, ThetaKind::Adam, StepSchedule::constant(1e-3));
  CHECK(opt.update_head(m, as_batch(samples), 1) == 32);
  CHECK(opt.update_head(m, as_batch(samples), 2) == 16);
  CHECK(opt.update_head(m, as_batch(samples), 4) == 4);
  CHECK(opt.update_head(m, as_batch(samples), 9) == 1);
  CHECK_THROWS(opt.step(m, model::Batch{}));
}

TEST_CASE("first-order baseline is plain SGD on both blocks") {
  Rng rng(5);
  const auto m0 = model::init_kaiming_uniform({3, 4, 2}, 5);
  const std::vector<Sample> samples{random_sample(rng, 3, 2), random_sample(rng, 3, 2)};
  auto m = m0;
  FirstOrderOptimizer opt(m, ThetaKind::Sgd, StepSchedule::constant(0.1));
  opt.step(m, as_batch(samples));

  const auto full = model::full_objective_and_grad(m0, samples);
  auto ref = m0;
  for (std::size_t i = 0; i < ref.head().flat().size(); ++i)
    ref.head().flat()[i] -= 0.1 * full.grad_head.flat()[i];
  for (std::size_t i = 0; i < ref.theta_size(); ++i) ref.theta()[i] -= 0.1 * full.grad_theta[i];
  CHECK(linalg::max_abs_diff(m.head(), ref.head()) <= 1e-14);
  CHECK(linalg::max_abs_diff(m.theta(), ref.theta()) <= 1e-14);
}

}  // TEST_SUITE
