#pragma once

// Parameter updates for separable models: the recursive least squares head
// update, the equivalent stochastic Newton head update, first-order
// extractor updaters, step-size schedules and the composite SepSA step that
// applies them in head-then-extractor order.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "sepsa/linalg.hpp"
#include "sepsa/model.hpp"
#include "sepsa/rng.hpp"

namespace sepsa::optim {

using linalg::Mat;
using linalg::SpdMat;
using linalg::Vec;
using model::Batch;
using model::Sample;
using model::SeparableModel;

inline constexpr double kDefaultGainScale = 100.0;

// ---------------------------------------------------------------------------
// Head updaters

/// Gain matrix B of the RLS recursion. One B is shared by every output row
/// of the head because the curvature E[h h^T] does not depend on the output.
struct RlsState {
  SpdMat b;
  std::uint64_t steps = 0;

  /// B0 = delta * I.
  static RlsState with_scale(std::size_t p, double delta = kDefaultGainScale);
};

/// One rank-one RLS update with features `h` and prediction `yhat = W h`:
///   B <- B - B h h^T B / (1 + h^T B h)
///   W_i <- W_i - (yhat_i - y_i) (B h)^T       for every output row i
/// using the already-downdated B. Throws NumericalError on non-finite results.
void rls_step(RlsState& state, Mat& head, std::span<const double> h, std::span<const double> y,
              std::span<const double> yhat);

/// Convenience overload evaluating features and prediction from `model`.
void rls_step(RlsState& state, SeparableModel& model, const Sample& s);

/// Robbins-Monro Hessian estimate for the stochastic Newton head update.
struct NewtonState {
  SpdMat h_hat;
  std::uint64_t k = 0;

  static NewtonState with_scale(std::size_t p, double scale);
};

///   H <- H + gamma (h h^T - H)
///   W_i <- W_i - gamma (yhat_i - y_i) H^{-1} h
/// With H0 = B0^{-1} and gamma_k = 1 / (k + 1) this reproduces rls_step
/// exactly: B_k = gamma_k H_k^{-1}.
void newton_step(NewtonState& state, Mat& head, std::span<const double> h,
                 std::span<const double> y, std::span<const double> yhat, double gamma);

void newton_step(NewtonState& state, SeparableModel& model, const Sample& s, double gamma);

// ---------------------------------------------------------------------------
// First-order updaters

enum class ThetaKind { Sgd, Nag, RmsProp, Adam };

std::string_view to_string(ThetaKind kind);
std::optional<ThetaKind> parse_theta_kind(std::string_view name);

struct ThetaHyper {
  double momentum = 0.9;   // NAG
  double rms_decay = 0.9;  // RMSprop squared-gradient average
  double beta1 = 0.9;      // Adam
  double beta2 = 0.999;    // Adam
  double eps = 1e-8;
};

class ThetaUpdater {
 public:
  ThetaUpdater(ThetaKind kind, std::size_t size, ThetaHyper hyper = {});

  ThetaKind kind() const { return kind_; }
  const ThetaHyper& hyper() const { return hyper_; }
  std::size_t size() const { return first_.size(); }
  std::uint64_t timestep() const { return t_; }

  /// In-place update of `theta` with gradient `grad` and step size `beta`.
  ///   SGD:     theta -= beta g
  ///   NAG:     v = mu v + g;  theta -= beta (g + mu v)
  ///   RMSprop: s = rho s + (1 - rho) g^2;  theta -= beta g / (sqrt(s) + eps)
  ///   Adam:    bias-corrected moments; theta -= beta m_hat / (sqrt(v_hat) + eps)
  void step(std::span<double> theta, std::span<const double> grad, double beta);

  /// Momentum buffer (NAG), squared-gradient average (RMSprop) or first
  /// moment (Adam). Zero-filled and unused for SGD.
  const Vec& first() const { return first_; }
  /// Adam second moment; empty for the other kinds.
  const Vec& second() const { return second_; }

  /// Rebuilds an updater from checkpointed buffers.
  static ThetaUpdater restore(ThetaKind kind, ThetaHyper hyper, std::uint64_t timestep, Vec first,
                              Vec second);

 private:
  ThetaKind kind_;
  ThetaHyper hyper_;
  std::uint64_t t_ = 0;
  Vec first_;
  Vec second_;
};

/// Value-returning form of ThetaUpdater::step.
Vec theta_step(ThetaUpdater& u, std::span<const double> theta, std::span<const double> grad,
               double beta);

// ---------------------------------------------------------------------------
// Step sizes

struct StepPair {
  double gamma = 0.0;  // head
  double beta = 0.0;   // extractor
};

/// Constant(lr) yields (lr, lr). Decaying yields (c eta_k, d eta_k) with
/// eta_k = eta0 / (1 + k / tau)^rho and rho in (0.5, 1], so that
/// sum eta_k diverges while sum eta_k^2 converges.
class StepSchedule {
 public:
  static StepSchedule constant(double lr);
  static StepSchedule decaying(double eta0, double tau, double rho, double c = 1.0,
                               double d = 1.0);

  bool is_constant() const { return constant_; }
  double eta(std::uint64_t k) const;
  StepPair next(std::uint64_t k) const;

  double lr() const { return eta0_; }
  double tau() const { return tau_; }
  double rho() const { return rho_; }
  double c() const { return c_; }
  double d() const { return d_; }

 private:
  StepSchedule() = default;
  bool constant_ = true;
  double eta0_ = 0.0;
  double tau_ = 1.0;
  double rho_ = 1.0;
  double c_ = 1.0;
  double d_ = 1.0;
};

/// (gamma_k, beta_k) for iteration k >= 1.
StepPair schedule_next(const StepSchedule& s, std::uint64_t k);

/// ceil(0.5^(epoch - 1) * batch_size), at least 1. `epoch` counts from 1.
std::size_t batch_decay_count(std::size_t epoch, std::size_t batch_size);

// ---------------------------------------------------------------------------
// Composite optimizers

struct StepMetrics {
  std::uint64_t iteration = 0;
  /// Mean ||y - yhat||^2 / d_o over the batch, evaluated after the head
  /// update and before the extractor update.
  double batch_mse = 0.0;
  double theta_grad_norm = 0.0;
  std::size_t head_updates = 0;
};

using HeadState = std::variant<RlsState, NewtonState>;

struct SepsaOptions {
  /// Use the exponentially decaying RLS subset in mini-batch mode.
  bool batch_decay = true;
  std::uint64_t seed = 0;
};

/// Per iteration: head update on (a subset of) the batch with features at
/// the current theta, then one extractor step with the batch-mean gradient
/// evaluated at the updated head.
class SepsaOptimizer {
 public:
  SepsaOptimizer(HeadState head, ThetaUpdater theta, StepSchedule schedule,
                 SepsaOptions options = {});

  /// Defaults: RLS head with B0 = delta I and the given extractor updater.
  static SepsaOptimizer make(const SeparableModel& model, ThetaKind theta_kind,
                             StepSchedule schedule, double delta = kDefaultGainScale,
                             SepsaOptions options = {});

  /// `epoch` (from 1) drives the RLS subset size in mini-batch mode.
  StepMetrics step(SeparableModel& model, const Batch& batch, std::size_t epoch = 1);

  /// The two halves of step(), exposed for order-sensitivity checks.
  std::size_t update_head(SeparableModel& model, const Batch& batch, std::size_t epoch);
  StepMetrics update_extractor(SeparableModel& model, const Batch& batch);

  std::uint64_t iteration() const { return k_; }
  const HeadState& head_state() const { return head_; }
  const ThetaUpdater& theta_updater() const { return theta_; }
  const StepSchedule& schedule() const { return schedule_; }
  const SepsaOptions& options() const { return options_; }

  /// Restores the iteration counter when resuming from a checkpoint.
  void set_iteration(std::uint64_t k) { k_ = k; }

 private:
  HeadState head_;
  ThetaUpdater theta_;
  StepSchedule schedule_;
  SepsaOptions options_;
  Rng subset_rng_;
  std::uint64_t k_ = 0;
  std::uint64_t head_steps_ = 0;
};

/// Free-function form of SepsaOptimizer::step.
StepMetrics sepsa_step(SepsaOptimizer& opt, SeparableModel& model, const Batch& batch,
                       std::size_t epoch = 1);

/// Baseline: one first-order updater over the concatenation of the head and
/// theta, with the batch-mean gradient of 1/2 ||y - yhat||^2.
class FirstOrderOptimizer {
 public:
  FirstOrderOptimizer(const SeparableModel& model, ThetaKind kind, StepSchedule schedule,
                      ThetaHyper hyper = {});

  StepMetrics step(SeparableModel& model, const Batch& batch);

  std::uint64_t iteration() const { return k_; }
  const ThetaUpdater& updater() const { return updater_; }

 private:
  ThetaUpdater updater_;
  StepSchedule schedule_;
  std::uint64_t k_ = 0;
  Vec params_;
  Vec grad_;
};

}  // namespace sepsa::optim
