#include "sepsa/optim.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sepsa::optim {

namespace {

void check_head_dims(const Mat& head, std::span<const double> h, std::span<const double> y,
                     std::span<const double> yhat) {
  if (head.cols() != h.size() || head.rows() != y.size() || y.size() != yhat.size()) {
    throw linalg::DimensionError("head update: inconsistent dimensions");
  }
}

void check_finite_head(const Mat& head, std::uint64_t step, const char* who) {
  if (!linalg::all_finite(head.flat())) {
    std::ostringstream os;
    os << who << ": non-finite head at iteration " << step;
    throw linalg::NumericalError(os.str());
  }
}

}  // namespace

RlsState RlsState::with_scale(std::size_t p, double delta) {
  return RlsState{SpdMat::identity(p, delta), 0};
}

void rls_step(RlsState& state, Mat& head, std::span<const double> h, std::span<const double> y,
              std::span<const double> yhat) {
  check_head_dims(head, h, y, yhat);
  if (state.b.size() != h.size()) throw linalg::DimensionError("rls_step: B size != feature dim");
  ++state.steps;
  Vec gain;
  try {
    state.b.rank_one_downdate(h, &gain);
  } catch (const linalg::NumericalError& e) {
    std::ostringstream os;
    os << "rls_step at iteration " << state.steps << ": " << e.what();
    throw linalg::NumericalError(os.str());
  }
  for (std::size_t i = 0; i < head.rows(); ++i) {
    const double r = yhat[i] - y[i];
    if (r == 0.0) continue;
    auto row = head.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] -= r * gain[j];
  }
  check_finite_head(head, state.steps, "rls_step");
}

void rls_step(RlsState& state, SeparableModel& model, const Sample& s) {
  const model::Forward f = model::forward(model, s.x);
  rls_step(state, model.head(), f.h, s.y, f.yhat);
}

NewtonState NewtonState::with_scale(std::size_t p, double scale) {
  return NewtonState{SpdMat::identity(p, scale), 0};
}

void newton_step(NewtonState& state, Mat& head, std::span<const double> h,
                 std::span<const double> y, std::span<const double> yhat, double gamma) {
  check_head_dims(head, h, y, yhat);
  if (state.h_hat.size() != h.size()) {
    throw linalg::DimensionError("newton_step: H size != feature dim");
  }
  ++state.k;
  if (gamma == 0.0) return;
  state.h_hat = linalg::blend_toward(state.h_hat, h, gamma);
  const Vec dir = linalg::solve_spd(state.h_hat, h);
  for (std::size_t i = 0; i < head.rows(); ++i) {
    const double r = yhat[i] - y[i];
    if (r == 0.0) continue;
    auto row = head.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] -= gamma * r * dir[j];
  }
  check_finite_head(head, state.k, "newton_step");
}

void newton_step(NewtonState& state, SeparableModel& model, const Sample& s, double gamma) {
  const model::Forward f = model::forward(model, s.x);
  newton_step(state, model.head(), f.h, s.y, f.yhat, gamma);
}

std::string_view to_string(ThetaKind kind) {
  switch (kind) {
    case ThetaKind::Sgd: return "sgd";
    case ThetaKind::Nag: return "nag";
    case ThetaKind::RmsProp: return "rmsprop";
    case ThetaKind::Adam: return "adam";
  }
  return "?";
}

std::optional<ThetaKind> parse_theta_kind(std::string_view name) {
  if (name == "sgd") return ThetaKind::Sgd;
  if (name == "nag") return ThetaKind::Nag;
  if (name == "rmsprop") return ThetaKind::RmsProp;
  if (name == "adam") return ThetaKind::Adam;
  return std::nullopt;
}

ThetaUpdater::ThetaUpdater(ThetaKind kind, std::size_t size, ThetaHyper hyper)
    : kind_(kind),
      hyper_(hyper),
      first_(size),
      second_(kind == ThetaKind::Adam ? size : 0) {}

ThetaUpdater ThetaUpdater::restore(ThetaKind kind, ThetaHyper hyper, std::uint64_t timestep,
                                   Vec first, Vec second) {
  ThetaUpdater u(kind, first.size(), hyper);
  if (second.size() != u.second_.size()) {
    throw linalg::DimensionError("ThetaUpdater::restore: second-moment size mismatch");
  }
  u.t_ = timestep;
  u.first_ = std::move(first);
  u.second_ = std::move(second);
  return u;
}

void ThetaUpdater::step(std::span<double> theta, std::span<const double> grad, double beta) {
  const std::size_t n = first_.size();
  if (theta.size() != n || grad.size() != n) {
    throw linalg::DimensionError("theta_step: parameter/gradient size mismatch");
  }
  ++t_;
  switch (kind_) {
    case ThetaKind::Sgd:
      for (std::size_t i = 0; i < n; ++i) theta[i] -= beta * grad[i];
      break;
    case ThetaKind::Nag: {
      const double mu = hyper_.momentum;
      for (std::size_t i = 0; i < n; ++i) {
        first_[i] = mu * first_[i] + grad[i];
        theta[i] -= beta * (grad[i] + mu * first_[i]);
      }
      break;
    }
    case ThetaKind::RmsProp: {
      const double rho = hyper_.rms_decay;
      for (std::size_t i = 0; i < n; ++i) {
        first_[i] = rho * first_[i] + (1.0 - rho) * grad[i] * grad[i];
        theta[i] -= beta * grad[i] / (std::sqrt(first_[i]) + hyper_.eps);
      }
      break;
    }
    case ThetaKind::Adam: {
      const double b1 = hyper_.beta1;
      const double b2 = hyper_.beta2;
      const double t = static_cast<double>(t_);
      const double c1 = 1.0 - std::pow(b1, t);
      const double c2 = 1.0 - std::pow(b2, t);
      for (std::size_t i = 0; i < n; ++i) {
        first_[i] = b1 * first_[i] + (1.0 - b1) * grad[i];
        second_[i] = b2 * second_[i] + (1.0 - b2) * grad[i] * grad[i];
        const double m_hat = first_[i] / c1;
        const double v_hat = second_[i] / c2;
        theta[i] -= beta * m_hat / (std::sqrt(v_hat) + hyper_.eps);
      }
      break;
    }
  }
}

Vec theta_step(ThetaUpdater& u, std::span<const double> theta, std::span<const double> grad,
               double beta) {
  Vec out = Vec::from(theta);
  u.step(out, grad, beta);
  return out;
}

StepSchedule StepSchedule::constant(double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be > 0");
  StepSchedule s;
  s.constant_ = true;
  s.eta0_ = lr;
  return s;
}

StepSchedule StepSchedule::decaying(double eta0, double tau, double rho, double c, double d) {
  if (!(eta0 > 0.0) || !(tau > 0.0)) throw std::invalid_argument("decaying schedule: eta0, tau must be > 0");
  if (!(rho > 0.5 && rho <= 1.0)) throw std::invalid_argument("decaying schedule: rho must lie in (0.5, 1]");
  if (!(c > 0.0) || !(d > 0.0)) throw std::invalid_argument("decaying schedule: c, d must be > 0");
  StepSchedule s;
  s.constant_ = false;
  s.eta0_ = eta0;
  s.tau_ = tau;
  s.rho_ = rho;
  s.c_ = c;
  s.d_ = d;
  return s;
}

double StepSchedule::eta(std::uint64_t k) const {
  if (constant_) return eta0_;
  return eta0_ / std::pow(1.0 + static_cast<double>(k) / tau_, rho_);
}

StepPair StepSchedule::next(std::uint64_t k) const {
  if (constant_) return {eta0_, eta0_};
  const double e = eta(k);
  return {c_ * e, d_ * e};
}

StepPair schedule_next(const StepSchedule& s, std::uint64_t k) { return s.next(k); }

std::size_t batch_decay_count(std::size_t epoch, std::size_t batch_size) {
  if (epoch == 0) throw std::invalid_argument("batch_decay_count: epoch counts from 1");
  if (batch_size == 0) return 0;
  // Exact ceil(batch / 2^(epoch-1)) in integers; the shift saturates.
  const std::size_t shift = epoch - 1;
  if (shift >= 63) return 1;
  const std::size_t denom = std::size_t{1} << shift;
  const std::size_t count = (batch_size + denom - 1) / denom;
  return count < 1 ? 1 : count;
}

SepsaOptimizer::SepsaOptimizer(HeadState head, ThetaUpdater theta, StepSchedule schedule,
                               SepsaOptions options)
    : head_(std::move(head)),
      theta_(std::move(theta)),
      schedule_(schedule),
      options_(options),
      subset_rng_(derive_seed(options.seed, "rls-subset")) {}

SepsaOptimizer SepsaOptimizer::make(const SeparableModel& model, ThetaKind theta_kind,
                                    StepSchedule schedule, double delta, SepsaOptions options) {
  return SepsaOptimizer(RlsState::with_scale(model.feature_dim(), delta),
                        ThetaUpdater(theta_kind, model.theta_size()), schedule, options);
}

std::size_t SepsaOptimizer::update_head(SeparableModel& model, const Batch& batch,
                                        std::size_t epoch) {
  if (batch.empty()) throw std::invalid_argument("sepsa_step: empty batch");
  std::vector<std::size_t> chosen;
  const std::size_t count =
      options_.batch_decay ? batch_decay_count(epoch, batch.size()) : batch.size();
  if (count >= batch.size()) {
    chosen.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) chosen[i] = i;
  } else {
    chosen = subset_rng_.sample_without_replacement(batch.size(), count);
  }
  for (std::size_t idx : chosen) {
    const Sample& s = batch[idx].get();
    ++head_steps_;
    if (auto* rls = std::get_if<RlsState>(&head_)) {
      rls_step(*rls, model, s);
    } else {
      auto& newton = std::get<NewtonState>(head_);
      newton_step(newton, model, s, schedule_.next(head_steps_).gamma);
    }
  }
  return chosen.size();
}

StepMetrics SepsaOptimizer::update_extractor(SeparableModel& model, const Batch& batch) {
  if (batch.empty()) throw std::invalid_argument("sepsa_step: empty batch");
  StepMetrics m;
  Vec grad(model.theta_size());
  const double w = 1.0 / static_cast<double>(batch.size());
  const double out_dim = static_cast<double>(model.output_dim());
  for (const Sample& s : batch) {
    const model::Forward f = model::forward(model, s.x);
    m.batch_mse += w * 2.0 * model::half_squared_error(s.y, f.yhat) / out_dim;
    model::accumulate_grad_theta(model, s, f, w, grad);
  }
  m.theta_grad_norm = linalg::norm2(grad);
  const StepPair steps = schedule_.next(k_);
  theta_.step(model.theta(), grad, steps.beta);
  return m;
}

StepMetrics SepsaOptimizer::step(SeparableModel& model, const Batch& batch, std::size_t epoch) {
  if (batch.empty()) throw std::invalid_argument("sepsa_step: empty batch");
  ++k_;
  const std::size_t updates = update_head(model, batch, epoch);
  StepMetrics m = update_extractor(model, batch);
  m.iteration = k_;
  m.head_updates = updates;
  return m;
}

StepMetrics sepsa_step(SepsaOptimizer& opt, SeparableModel& model, const Batch& batch,
                       std::size_t epoch) {
  return opt.step(model, batch, epoch);
}

FirstOrderOptimizer::FirstOrderOptimizer(const SeparableModel& model, ThetaKind kind,
                                         StepSchedule schedule, ThetaHyper hyper)
    : updater_(kind, model.head().flat().size() + model.theta_size(), hyper),
      schedule_(schedule),
      params_(model.head().flat().size() + model.theta_size()),
      grad_(model.head().flat().size() + model.theta_size()) {}

StepMetrics FirstOrderOptimizer::step(SeparableModel& model, const Batch& batch) {
  if (batch.empty()) throw std::invalid_argument("first-order step: empty batch");
  ++k_;
  StepMetrics m;
  m.iteration = k_;
  const std::size_t head_n = model.head().flat().size();
  std::fill(grad_.begin(), grad_.end(), 0.0);
  const std::span<double> grad_head = grad_.span().subspan(0, head_n);
  const std::span<double> grad_theta = grad_.span().subspan(head_n);
  const double w = 1.0 / static_cast<double>(batch.size());
  const double out_dim = static_cast<double>(model.output_dim());
  const std::size_t p = model.feature_dim();
  for (const Sample& s : batch) {
    const model::Forward f = model::forward(model, s.x);
    m.batch_mse += w * 2.0 * model::half_squared_error(s.y, f.yhat) / out_dim;
    for (std::size_t o = 0; o < model.output_dim(); ++o) {
      const double r = w * (f.yhat[o] - s.y[o]);
      for (std::size_t j = 0; j < p; ++j) grad_head[o * p + j] += r * f.h[j];
    }
    model::accumulate_grad_theta(model, s, f, w, grad_theta);
  }
  m.theta_grad_norm = linalg::norm2(grad_theta);

  const auto head = model.head().flat();
  const auto theta = model.theta();
  std::copy(head.begin(), head.end(), params_.begin());
  std::copy(theta.begin(), theta.end(), params_.begin() + static_cast<std::ptrdiff_t>(head_n));
  updater_.step(params_, grad_, schedule_.next(k_).beta);
  std::copy(params_.begin(), params_.begin() + static_cast<std::ptrdiff_t>(head_n), head.begin());
  std::copy(params_.begin() + static_cast<std::ptrdiff_t>(head_n), params_.end(), theta.begin());
  return m;
}

}  // namespace sepsa::optim
