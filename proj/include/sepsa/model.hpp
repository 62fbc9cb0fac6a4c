#pragma once

// Separable model  yhat = W h(x; theta)  with a one-hidden-layer ReLU
// feature extractor. The extractor appends a constant 1 to its output so the
// head's bias lives in the last column of W.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sepsa/linalg.hpp"

namespace sepsa::model {

using linalg::Mat;
using linalg::Vec;

struct Sample {
  Vec x;
  Vec y;
};

/// Non-owning view of the samples in one mini-batch (a single sample online).
using Batch = std::vector<std::reference_wrapper<const Sample>>;

struct Dims {
  std::size_t input = 0;
  std::size_t hidden = 0;
  std::size_t output = 0;

  /// Feature dimension p seen by the head (hidden units plus bias feature).
  std::size_t features() const { return hidden + 1; }
};

/// Parametric map x -> h(x; theta). Implementations own theta as one flat
/// vector so first-order updaters can treat it uniformly.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;

  virtual std::string kind() const = 0;
  /// Shape parameters sufficient to rebuild the extractor via make_extractor.
  virtual std::vector<std::size_t> layout() const = 0;

  virtual std::size_t input_dim() const = 0;
  virtual std::size_t feature_dim() const = 0;

  virtual std::span<const double> params() const = 0;
  virtual std::span<double> params() = 0;

  virtual Vec features(std::span<const double> x) const = 0;

  /// grad += scale * (dh/dtheta)^T dloss_dh, where dloss_dh has
  /// feature_dim() entries (the constant feature's entry is ignored).
  virtual void accumulate_param_grad(std::span<const double> x, std::span<const double> dloss_dh,
                                     double scale, std::span<double> grad) const = 0;

  virtual std::unique_ptr<FeatureExtractor> clone() const = 0;
};

/// h(x) = [ReLU(W1 x + b1); 1]. theta stores W1 (hidden x input, row-major)
/// followed by b1.
class ReluExtractor final : public FeatureExtractor {
 public:
  ReluExtractor(std::size_t input_dim, std::size_t hidden_dim);
  ReluExtractor(const Mat& weights, std::span<const double> bias);

  std::string kind() const override { return "relu"; }
  std::vector<std::size_t> layout() const override { return {input_, hidden_}; }
  std::size_t input_dim() const override { return input_; }
  std::size_t feature_dim() const override { return hidden_ + 1; }
  std::size_t hidden_dim() const { return hidden_; }

  std::span<const double> params() const override { return theta_.span(); }
  std::span<double> params() override { return theta_.span(); }

  double w1(std::size_t j, std::size_t i) const { return theta_[j * input_ + i]; }
  double& w1(std::size_t j, std::size_t i) { return theta_[j * input_ + i]; }
  double b1(std::size_t j) const { return theta_[hidden_ * input_ + j]; }
  double& b1(std::size_t j) { return theta_[hidden_ * input_ + j]; }

  Vec pre_activations(std::span<const double> x) const;
  Vec features(std::span<const double> x) const override;
  void accumulate_param_grad(std::span<const double> x, std::span<const double> dloss_dh,
                             double scale, std::span<double> grad) const override;

  std::unique_ptr<FeatureExtractor> clone() const override {
    return std::make_unique<ReluExtractor>(*this);
  }

 private:
  std::size_t input_;
  std::size_t hidden_;
  Vec theta_;
};

std::unique_ptr<FeatureExtractor> make_extractor(const std::string& kind,
                                                 std::span<const std::size_t> layout);

class SeparableModel {
 public:
  /// `head` must be output x extractor->feature_dim().
  SeparableModel(std::unique_ptr<FeatureExtractor> extractor, Mat head);

  SeparableModel(const SeparableModel& other);
  SeparableModel& operator=(const SeparableModel& other);
  SeparableModel(SeparableModel&&) noexcept = default;
  SeparableModel& operator=(SeparableModel&&) noexcept = default;

  std::size_t input_dim() const { return extractor_->input_dim(); }
  std::size_t feature_dim() const { return extractor_->feature_dim(); }
  std::size_t output_dim() const { return head_.rows(); }
  std::size_t theta_size() const { return extractor_->params().size(); }

  const FeatureExtractor& extractor() const { return *extractor_; }
  FeatureExtractor& extractor() { return *extractor_; }

  std::span<const double> theta() const { return extractor_->params(); }
  std::span<double> theta() { return extractor_->params(); }

  const Mat& head() const { return head_; }
  Mat& head() { return head_; }

  bool all_finite() const;

 private:
  std::unique_ptr<FeatureExtractor> extractor_;
  Mat head_;
};

struct Forward {
  Vec h;
  Vec yhat;
};

Vec features(const SeparableModel& model, std::span<const double> x);
Forward forward(const SeparableModel& model, std::span<const double> x);

/// 1/2 ||y - yhat||^2.
double loss(const SeparableModel& model, const Sample& s);
double half_squared_error(std::span<const double> y, std::span<const double> yhat);

/// dF/dW = (yhat - y) h^T, shape output x features.
Mat grad_alpha(const SeparableModel& model, const Sample& s);
Vec grad_theta(const SeparableModel& model, const Sample& s);

/// grad += scale * dF/dtheta for a sample whose forward pass is `fwd`.
void accumulate_grad_theta(const SeparableModel& model, const Sample& s, const Forward& fwd,
                           double scale, std::span<double> grad);

/// Kaiming-uniform initialization: weights U(-sqrt(6/fan_in), +sqrt(6/fan_in)),
/// biases U(-1/sqrt(fan_in), +1/sqrt(fan_in)). The head's fan-in is the
/// hidden width.
SeparableModel init_kaiming_uniform(const Dims& dims, std::uint64_t seed);

struct ObjectiveAndGrad {
  double f = 0.0;
  Mat grad_head;
  Vec grad_theta;
};

/// Sample means of the loss and both gradient blocks.
ObjectiveAndGrad full_objective_and_grad(const SeparableModel& model,
                                         std::span<const Sample> samples);

}  // namespace sepsa::model
