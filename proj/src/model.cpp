#include "sepsa/model.hpp"

#include <cmath>
#include <stdexcept>

#include "sepsa/rng.hpp"

namespace sepsa::model {

ReluExtractor::ReluExtractor(std::size_t input_dim, std::size_t hidden_dim)
    : input_(input_dim), hidden_(hidden_dim), theta_(hidden_dim * input_dim + hidden_dim) {
  if (input_dim == 0 || hidden_dim == 0) {
    throw std::invalid_argument("ReluExtractor: dimensions must be positive");
  }
}

ReluExtractor::ReluExtractor(const Mat& weights, std::span<const double> bias)
    : ReluExtractor(weights.cols(), weights.rows()) {
  if (bias.size() != hidden_) throw linalg::DimensionError("ReluExtractor: b1 length != W1 rows");
  for (std::size_t j = 0; j < hidden_; ++j) {
    for (std::size_t i = 0; i < input_; ++i) w1(j, i) = weights(j, i);
    b1(j) = bias[j];
  }
}

Vec ReluExtractor::pre_activations(std::span<const double> x) const {
  if (x.size() != input_) throw linalg::DimensionError("features: x length != input dim");
  Vec z(hidden_);
  const double* w = theta_.data();
  for (std::size_t j = 0; j < hidden_; ++j) {
    double s = b1(j);
    const double* wr = w + j * input_;
    for (std::size_t i = 0; i < input_; ++i) s += wr[i] * x[i];
    z[j] = s;
  }
  return z;
}

Vec ReluExtractor::features(std::span<const double> x) const {
  Vec h = pre_activations(x);
  std::vector<double> out(h.begin(), h.end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  out.push_back(1.0);
  return Vec(std::move(out));
}

void ReluExtractor::accumulate_param_grad(std::span<const double> x,
                                          std::span<const double> dloss_dh, double scale,
                                          std::span<double> grad) const {
  if (dloss_dh.size() != hidden_ + 1 || grad.size() != theta_.size()) {
    throw linalg::DimensionError("accumulate_param_grad: size mismatch");
  }
  const Vec z = pre_activations(x);
  const std::size_t bias_offset = hidden_ * input_;
  for (std::size_t j = 0; j < hidden_; ++j) {
    // ReLU subgradient at exactly zero is taken as zero.
    if (!(z[j] > 0.0)) continue;
    const double delta = scale * dloss_dh[j];
    if (delta == 0.0) continue;
    double* g = grad.data() + j * input_;
    for (std::size_t i = 0; i < input_; ++i) g[i] += delta * x[i];
    grad[bias_offset + j] += delta;
  }
}

std::unique_ptr<FeatureExtractor> make_extractor(const std::string& kind,
                                                 std::span<const std::size_t> layout) {
  if (kind == "relu") {
    if (layout.size() != 2) throw std::invalid_argument("relu extractor layout needs (input, hidden)");
    return std::make_unique<ReluExtractor>(layout[0], layout[1]);
  }
  throw std::invalid_argument("unknown feature extractor kind: " + kind);
}

SeparableModel::SeparableModel(std::unique_ptr<FeatureExtractor> extractor, Mat head)
    : extractor_(std::move(extractor)), head_(std::move(head)) {
  if (!extractor_) throw std::invalid_argument("SeparableModel: null extractor");
  if (head_.cols() != extractor_->feature_dim() || head_.rows() == 0) {
    throw linalg::DimensionError("SeparableModel: head must be output x feature_dim");
  }
}

SeparableModel::SeparableModel(const SeparableModel& other)
    : extractor_(other.extractor_->clone()), head_(other.head_) {}

SeparableModel& SeparableModel::operator=(const SeparableModel& other) {
  if (this != &other) {
    extractor_ = other.extractor_->clone();
    head_ = other.head_;
  }
  return *this;
}

bool SeparableModel::all_finite() const {
  return linalg::all_finite(theta()) && linalg::all_finite(head_.flat());
}

Vec features(const SeparableModel& model, std::span<const double> x) {
  return model.extractor().features(x);
}

Forward forward(const SeparableModel& model, std::span<const double> x) {
  Forward f;
  f.h = model.extractor().features(x);
  f.yhat = linalg::matvec(model.head(), f.h);
  return f;
}

double half_squared_error(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw linalg::DimensionError("loss: y and yhat lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - yhat[i];
    s += r * r;
  }
  return 0.5 * s;
}

double loss(const SeparableModel& model, const Sample& s) {
  return half_squared_error(s.y, forward(model, s.x).yhat);
}

namespace {

Vec residual(const Forward& f, const Sample& s) {
  if (s.y.size() != f.yhat.size()) throw linalg::DimensionError("sample target dim != model output dim");
  Vec r(f.yhat.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = f.yhat[i] - s.y[i];
  return r;
}

}  // namespace

Mat grad_alpha(const SeparableModel& model, const Sample& s) {
  const Forward f = forward(model, s.x);
  return linalg::outer(residual(f, s), f.h);
}

void accumulate_grad_theta(const SeparableModel& model, const Sample& s, const Forward& fwd,
                           double scale, std::span<double> grad) {
  const Vec r = residual(fwd, s);
  const Vec dh = linalg::matvec_transposed(model.head(), r);
  model.extractor().accumulate_param_grad(s.x, dh, scale, grad);
}

Vec grad_theta(const SeparableModel& model, const Sample& s) {
  Vec g(model.theta_size());
  accumulate_grad_theta(model, s, forward(model, s.x), 1.0, g);
  return g;
}

SeparableModel init_kaiming_uniform(const Dims& dims, std::uint64_t seed) {
  if (dims.input == 0 || dims.hidden == 0 || dims.output == 0) {
    throw std::invalid_argument("init_kaiming_uniform: dimensions must be positive");
  }
  Rng rng(derive_seed(seed, "init"));
  auto ex = std::make_unique<ReluExtractor>(dims.input, dims.hidden);
  const double w1_bound = std::sqrt(6.0 / static_cast<double>(dims.input));
  const double b1_bound = 1.0 / std::sqrt(static_cast<double>(dims.input));
  for (std::size_t j = 0; j < dims.hidden; ++j)
    for (std::size_t i = 0; i < dims.input; ++i) ex->w1(j, i) = rng.uniform(-w1_bound, w1_bound);
  for (std::size_t j = 0; j < dims.hidden; ++j) ex->b1(j) = rng.uniform(-b1_bound, b1_bound);

  Mat head(dims.output, dims.features());
  const double w2_bound = std::sqrt(6.0 / static_cast<double>(dims.hidden));
  const double b2_bound = 1.0 / std::sqrt(static_cast<double>(dims.hidden));
  for (std::size_t o = 0; o < dims.output; ++o)
    for (std::size_t j = 0; j < dims.hidden; ++j) head(o, j) = rng.uniform(-w2_bound, w2_bound);
  for (std::size_t o = 0; o < dims.output; ++o) head(o, dims.hidden) = rng.uniform(-b2_bound, b2_bound);
  return SeparableModel(std::move(ex), std::move(head));
}

ObjectiveAndGrad full_objective_and_grad(const SeparableModel& model,
                                         std::span<const Sample> samples) {
  if (samples.empty()) throw std::invalid_argument("full_objective_and_grad: empty dataset");
  ObjectiveAndGrad out;
  out.grad_head = Mat(model.output_dim(), model.feature_dim());
  out.grad_theta = Vec(model.theta_size());
  const double w = 1.0 / static_cast<double>(samples.size());
  for (const Sample& s : samples) {
    const Forward f = forward(model, s.x);
    out.f += w * half_squared_error(s.y, f.yhat);
    const Vec r = residual(f, s);
    for (std::size_t o = 0; o < r.size(); ++o) {
      auto row = out.grad_head.row(o);
      for (std::size_t j = 0; j < f.h.size(); ++j) row[j] += w * r[o] * f.h[j];
    }
    const Vec dh = linalg::matvec_transposed(model.head(), r);
    model.extractor().accumulate_param_grad(s.x, dh, w, out.grad_theta);
  }
  return out;
}

}  // namespace sepsa::model
