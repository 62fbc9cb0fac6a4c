#pragma once

// Independent oracles used to check the optimizers: a closed-form
// regularized least-squares solve, central finite differences, an
// RLS-versus-Newton trajectory comparison and full-gradient-norm tracing.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sepsa/linalg.hpp"
#include "sepsa/model.hpp"

namespace sepsa::verify {

using linalg::Mat;
using linalg::SpdMat;
using linalg::Vec;

struct OracleReport {
  std::string name;
  double max_abs_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string instance;
};

OracleReport make_report(std::string name, double error, double tolerance, std::string instance);

/// argmin_W  sum_i ||y_i - W h_i||^2 + sum_rows (W - W0) B0^{-1} (W - W0)^T
/// via the normal equations (H^T H + B0^{-1}) w_r = H^T y_r + B0^{-1} w0_r.
/// `features` is n x p, `targets` n x d_o, `w0` d_o x p.
Mat batch_ls_oracle(const Mat& features, const Mat& targets, const SpdMat& b0, const Mat& w0);

/// Central differences (fn(x + s e_i) - fn(x - s e_i)) / 2s.
Vec fd_gradient(const std::function<double(std::span<const double>)>& fn,
                std::span<const double> at, double step);

/// ||a - b|| / max(||a||, ||b||, 1e-8).
double relative_error(std::span<const double> a, std::span<const double> b);

struct HeadSample {
  Vec h;
  Vec y;
};

/// Runs rls_step from B0 = delta I and newton_step from H0 = B0^{-1} with
/// gamma_j = 1 / (j + 1) over the same stream, both starting at `w0`, and
/// reports the largest head deviation along the trajectory.
OracleReport trajectory_equivalence(std::span<const HeadSample> stream, const Mat& w0,
                                    double delta, double tolerance = 1e-8);

/// Random stream with standard normal features; `zero_residual` plants
/// targets y = W0 h so both trajectories stay at W0.
std::vector<HeadSample> random_head_stream(std::uint64_t seed, std::size_t p, std::size_t d_o,
                                           std::size_t steps, const Mat& w0,
                                           bool zero_residual = false);

OracleReport trajectory_equivalence(std::uint64_t seed, std::size_t p, std::size_t steps,
                                    std::size_t d_o = 1, double tolerance = 1e-8);

struct GradNormPoint {
  std::uint64_t k = 0;
  double norm = 0.0;
};

/// Euclidean norm of the full-data gradient over both blocks (head and theta).
double full_grad_norm(const model::SeparableModel& model, std::span<const model::Sample> samples);

struct Snapshot {
  std::uint64_t k = 0;
  model::SeparableModel model;
};

std::vector<GradNormPoint> grad_norm_trace(std::span<const Snapshot> snapshots,
                                           std::span<const model::Sample> samples);

/// Analytic head and theta gradients against central differences of the
/// loss. Hidden units whose pre-activation is within `kink` of zero are
/// excluded from the theta comparison.
OracleReport gradient_check(const model::SeparableModel& model, const model::Sample& s,
                            double step = 1e-6, double kink = 1e-4, double tolerance = 1e-5);

/// Dense inverse by Gauss-Jordan elimination with partial pivoting.
Mat gauss_jordan_inverse(const Mat& a);

/// Random SPD matrix Q diag(lambda) Q^T with eigenvalues log-spaced in
/// [1 / condition, 1].
Mat random_spd(std::uint64_t seed, std::size_t p, double condition);

/// sherman_morrison_downdate(B, h) against inverse(inverse(B) + h h^T).
OracleReport sherman_morrison_check(std::uint64_t seed, std::size_t p, double condition,
                                    double tolerance = 1e-8);

/// One pass of rls_step over a random frozen-theta instance against
/// batch_ls_oracle.
OracleReport rls_oracle_check(std::uint64_t seed, std::size_t n, std::size_t p, std::size_t d_o,
                              double tolerance = 1e-7);

/// The default battery run by `sepsa verify`.
std::vector<OracleReport> run_default_suite(std::uint64_t seed);

void print_reports(std::ostream& os, std::span<const OracleReport> reports);

}  // namespace sepsa::verify
