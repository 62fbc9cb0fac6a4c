#include "sepsa/verify.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "sepsa/optim.hpp"
#include "sepsa/rng.hpp"

namespace sepsa::verify {

namespace {

std::string describe(std::initializer_list<std::pair<const char*, double>> fields) {
  std::ostringstream os;
  bool first = true;
  for (const auto& [k, v] : fields) {
    os << (first ? "" : " ") << k << '=' << v;
    first = false;
  }
  return os.str();
}

}  // namespace

OracleReport make_report(std::string name, double error, double tolerance, std::string instance) {
  return OracleReport{std::move(name), error, tolerance, error <= tolerance, std::move(instance)};
}

Mat batch_ls_oracle(const Mat& features, const Mat& targets, const SpdMat& b0, const Mat& w0) {
  const std::size_t n = features.rows();
  const std::size_t p = features.cols();
  const std::size_t d_o = targets.cols();
  if (targets.rows() != n || b0.size() != p || w0.rows() != d_o || w0.cols() != p) {
    throw linalg::DimensionError("batch_ls_oracle: inconsistent dimensions");
  }
  // B0^{-1} column by column.
  Mat b0_inv(p, p);
  for (std::size_t j = 0; j < p; ++j) {
    Vec e(p);
    e[j] = 1.0;
    const Vec col = linalg::solve_spd(b0, e);
    for (std::size_t i = 0; i < p; ++i) b0_inv(i, j) = col[i];
  }
  linalg::symmetrize(b0_inv);

  Mat normal = b0_inv;
  for (std::size_t k = 0; k < n; ++k) {
    const auto h = features.row(k);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) normal(i, j) += h[i] * h[j];
  }
  const SpdMat lhs(std::move(normal));

  Mat w(d_o, p);
  for (std::size_t r = 0; r < d_o; ++r) {
    Vec rhs = linalg::matvec(b0_inv, w0.row(r));
    for (std::size_t k = 0; k < n; ++k) {
      const auto h = features.row(k);
      const double y = targets(k, r);
      for (std::size_t i = 0; i < p; ++i) rhs[i] += h[i] * y;
    }
    const Vec sol = linalg::solve_spd(lhs, rhs);
    std::copy(sol.begin(), sol.end(), w.row(r).begin());
  }
  return w;
}

Vec fd_gradient(const std::function<double(std::span<const double>)>& fn,
                std::span<const double> at, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("fd_gradient: step must be > 0");
  Vec x = Vec::from(at);
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double fp = fn(x);
    x[i] = orig - step;
    const double fm = fn(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw linalg::DimensionError("relative_error: length mismatch");
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] - b[i]) * (a[i] - b[i]);
  const double denom = std::max({linalg::norm2(a), linalg::norm2(b), 1e-8});
  return std::sqrt(diff) / denom;
}

OracleReport trajectory_equivalence(std::span<const HeadSample> stream, const Mat& w0,
                                    double delta, double tolerance) {
  const std::size_t p = w0.cols();
  optim::RlsState rls = optim::RlsState::with_scale(p, delta);
  optim::NewtonState newton = optim::NewtonState::with_scale(p, 1.0 / delta);
  Mat w_rls = w0;
  Mat w_newton = w0;
  double worst = 0.0;
  std::uint64_t j = 0;
  for (const auto& s : stream) {
    ++j;
    const Vec yhat_rls = linalg::matvec(w_rls, s.h);
    optim::rls_step(rls, w_rls, s.h, s.y, yhat_rls);
    const Vec yhat_newton = linalg::matvec(w_newton, s.h);
    optim::newton_step(newton, w_newton, s.h, s.y, yhat_newton,
                       1.0 / static_cast<double>(j + 1));
    worst = std::max(worst, linalg::max_abs_diff(w_rls, w_newton));
  }
  return make_report("rls-newton-trajectory", worst, tolerance,
                     describe({{"p", static_cast<double>(p)},
                               {"steps", static_cast<double>(stream.size())},
                               {"delta", delta}}));
}

std::vector<HeadSample> random_head_stream(std::uint64_t seed, std::size_t p, std::size_t d_o,
                                           std::size_t steps, const Mat& w0, bool zero_residual) {
  Rng rng(derive_seed(seed, "head-stream"));
  std::vector<HeadSample> out;
  out.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    HeadSample s{Vec(p), Vec(d_o)};
    for (double& v : s.h) v = rng.normal();
    if (zero_residual) {
      s.y = linalg::matvec(w0, s.h);
    } else {
      for (double& v : s.y) v = 2.0 * rng.normal();
    }
    out.push_back(std::move(s));
  }
  return out;
}

OracleReport trajectory_equivalence(std::uint64_t seed, std::size_t p, std::size_t steps,
                                    std::size_t d_o, double tolerance) {
  Rng rng(derive_seed(seed, "trajectory-init"));
  Mat w0(d_o, p);
  for (double& v : w0.flat()) v = rng.normal();
  const double delta = std::exp(rng.uniform(std::log(0.1), std::log(100.0)));
  const auto stream = random_head_stream(seed, p, d_o, steps, w0);
  auto report = trajectory_equivalence(stream, w0, delta, tolerance);
  report.instance += " seed=" + std::to_string(seed);
  return report;
}

double full_grad_norm(const model::SeparableModel& model, std::span<const model::Sample> samples) {
  const auto og = model::full_objective_and_grad(model, samples);
  const double a = linalg::norm2(og.grad_head.flat());
  const double b = linalg::norm2(og.grad_theta);
  return std::sqrt(a * a + b * b);
}

std::vector<GradNormPoint> grad_norm_trace(std::span<const Snapshot> snapshots,
                                           std::span<const model::Sample> samples) {
  std::vector<GradNormPoint> out;
  out.reserve(snapshots.size());
  for (const auto& snap : snapshots) out.push_back({snap.k, full_grad_norm(snap.model, samples)});
  return out;
}

OracleReport gradient_check(const model::SeparableModel& model, const model::Sample& s,
                            double step, double kink, double tolerance) {
  // Head block: the loss is quadratic in W, so no skipping is needed.
  const Mat analytic_head = model::grad_alpha(model, s);
  model::SeparableModel probe = model;
  const auto head_fn = [&](std::span<const double> w) {
    std::copy(w.begin(), w.end(), probe.head().flat().begin());
    return model::loss(probe, s);
  };
  const Vec fd_head = fd_gradient(head_fn, model.head().flat(), step);
  const double head_err = relative_error(analytic_head.flat(), fd_head);

  probe = model;
  const Vec analytic_theta = model::grad_theta(model, s);
  const auto theta_fn = [&](std::span<const double> t) {
    std::copy(t.begin(), t.end(), probe.theta().begin());
    return model::loss(probe, s);
  };
  const Vec fd_theta = fd_gradient(theta_fn, model.theta(), step);

  // Mask out parameters feeding hidden units sitting on the ReLU kink.
  std::vector<double> a;
  std::vector<double> b;
  std::size_t skipped = 0;
  const auto* relu = dynamic_cast<const model::ReluExtractor*>(&model.extractor());
  if (relu != nullptr) {
    const Vec z = relu->pre_activations(s.x);
    const std::size_t d = relu->input_dim();
    const std::size_t hidden = relu->hidden_dim();
    for (std::size_t idx = 0; idx < analytic_theta.size(); ++idx) {
      const std::size_t unit = idx < hidden * d ? idx / d : idx - hidden * d;
      if (std::abs(z[unit]) < kink) {
        ++skipped;
        continue;
      }
      a.push_back(analytic_theta[idx]);
      b.push_back(fd_theta[idx]);
    }
  } else {
    a.assign(analytic_theta.begin(), analytic_theta.end());
    b.assign(fd_theta.begin(), fd_theta.end());
  }
  const double theta_err = relative_error(a, b);
  std::ostringstream inst;
  inst << "d=" << model.input_dim() << " p=" << model.feature_dim() << " d_o=" << model.output_dim()
       << " skipped=" << skipped << " head_rel=" << head_err << " theta_rel=" << theta_err;
  return make_report("gradient-check", std::max(head_err, theta_err), tolerance, inst.str());
}

Mat gauss_jordan_inverse(const Mat& a) {
  if (a.rows() != a.cols()) throw linalg::DimensionError("gauss_jordan_inverse: not square");
  const std::size_t n = a.rows();
  Mat work = a;
  Mat inv = Mat::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(work(r, col)) > std::abs(work(pivot, col))) pivot = r;
    if (work(pivot, col) == 0.0) throw linalg::NumericalError("gauss_jordan_inverse: singular matrix");
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(work(pivot, j), work(col, j));
        std::swap(inv(pivot, j), inv(col, j));
      }
    }
    const double d = work(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      work(col, j) /= d;
      inv(col, j) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = work(r, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        work(r, j) -= f * work(col, j);
        inv(r, j) -= f * inv(col, j);
      }
    }
  }
  return inv;
}

Mat random_spd(std::uint64_t seed, std::size_t p, double condition) {
  Rng rng(derive_seed(seed, "random-spd"));
  // Orthonormal basis by modified Gram-Schmidt on a Gaussian matrix.
  Mat q(p, p);
  for (double& v : q.flat()) v = rng.normal();
  for (std::size_t i = 0; i < p; ++i) {
    auto qi = q.row(i);
    for (std::size_t k = 0; k < i; ++k) {
      const double c = linalg::dot(qi, q.row(k));
      const auto qk = q.row(k);
      for (std::size_t j = 0; j < p; ++j) qi[j] -= c * qk[j];
    }
    const double nrm = linalg::norm2(qi);
    for (double& v : qi) v /= nrm;
  }
  std::vector<double> lambda(p);
  for (std::size_t i = 0; i < p; ++i) {
    const double t = p == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(p - 1);
    lambda[i] = std::pow(condition, -t);
  }
  Mat out(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < p; ++k) s += q(k, i) * lambda[k] * q(k, j);
      out(i, j) = s;
    }
  linalg::symmetrize(out);
  return out;
}

OracleReport sherman_morrison_check(std::uint64_t seed, std::size_t p, double condition,
                                    double tolerance) {
  const SpdMat b(random_spd(seed, p, condition));
  Rng rng(derive_seed(seed, "sm-h"));
  Vec h(p);
  for (double& v : h) v = rng.normal();
  const SpdMat fast = linalg::sherman_morrison_downdate(b, h);
  Mat direct = gauss_jordan_inverse(b.mat());
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) direct(i, j) += h[i] * h[j];
  direct = gauss_jordan_inverse(direct);
  const double err = linalg::max_abs_diff(fast.mat(), direct);
  return make_report("sherman-morrison", err, tolerance,
                     describe({{"p", static_cast<double>(p)},
                               {"cond", condition},
                               {"seed", static_cast<double>(seed)}}));
}

OracleReport rls_oracle_check(std::uint64_t seed, std::size_t n, std::size_t p, std::size_t d_o,
                              double tolerance) {
  if (p < 2) throw std::invalid_argument("rls_oracle_check: p must be >= 2 (hidden + bias)");
  Rng rng(derive_seed(seed, "rls-oracle"));
  const std::size_t d = 1 + rng.index(8);
  const auto frozen = model::init_kaiming_uniform({d, p - 1, d_o}, derive_seed(seed, "rls-model"));
  Mat features(n, p);
  Mat targets(n, d_o);
  for (std::size_t k = 0; k < n; ++k) {
    Vec x(d);
    for (double& v : x) v = rng.normal();
    const Vec h = model::features(frozen, x);
    std::copy(h.begin(), h.end(), features.row(k).begin());
    for (std::size_t o = 0; o < d_o; ++o) targets(k, o) = 2.0 * rng.normal();
  }
  const double delta = std::exp(rng.uniform(std::log(0.1), std::log(100.0)));
  const Mat& w0 = frozen.head();

  optim::RlsState state = optim::RlsState::with_scale(p, delta);
  Mat w = w0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto h = features.row(k);
    const Vec yhat = linalg::matvec(w, h);
    optim::rls_step(state, w, h, targets.row(k), yhat);
  }
  const Mat oracle = batch_ls_oracle(features, targets, SpdMat::identity(p, delta), w0);
  return make_report("rls-vs-batch-ls", linalg::max_abs_diff(w, oracle), tolerance,
                     describe({{"n", static_cast<double>(n)},
                               {"p", static_cast<double>(p)},
                               {"d_o", static_cast<double>(d_o)},
                               {"delta", delta},
                               {"seed", static_cast<double>(seed)}}));
}

std::vector<OracleReport> run_default_suite(std::uint64_t seed) {
  std::vector<OracleReport> out;
  out.push_back(sherman_morrison_check(seed, 12, 1e6));
  out.push_back(rls_oracle_check(seed, 300, 20, 2));
  out.push_back(trajectory_equivalence(seed, 10, 200, 2));
  {
    Rng rng(derive_seed(seed, "suite-grad"));
    const std::size_t d = 1 + rng.index(8);
    const std::size_t hidden = 1 + rng.index(8);
    const std::size_t d_o = 1 + rng.index(3);
    const auto m = model::init_kaiming_uniform({d, hidden, d_o}, derive_seed(seed, "suite-model"));
    model::Sample s{Vec(d), Vec(d_o)};
    for (double& v : s.x) v = rng.normal();
    for (double& v : s.y) v = rng.normal();
    out.push_back(gradient_check(m, s));
  }
  {
    const auto quad = [](std::span<const double> x) { return 0.5 * linalg::dot(x, x); };
    const Vec at{3.0, -1.5, 0.25};
    const Vec g = fd_gradient(quad, at, 1e-6);
    out.push_back(make_report("fd-quadratic", linalg::max_abs_diff(g, at), 1e-8, "f=0.5|x|^2"));
  }
  return out;
}

void print_reports(std::ostream& os, std::span<const OracleReport> reports) {
  os << std::left << std::setw(24) << "oracle" << std::setw(14) << "max_error" << std::setw(12)
     << "tolerance" << std::setw(6) << "pass" << "instance\n";
  for (const auto& r : reports) {
    std::ostringstream err;
    err << std::scientific << std::setprecision(3) << r.max_abs_error;
    std::ostringstream tol;
    tol << std::scientific << std::setprecision(1) << r.tolerance;
    os << std::left << std::setw(24) << r.name << std::setw(14) << err.str() << std::setw(12)
       << tol.str() << std::setw(6) << (r.pass ? "yes" : "NO") << r.instance << '\n';
  }
}

}  // namespace sepsa::verify
