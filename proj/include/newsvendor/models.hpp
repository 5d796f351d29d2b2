#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "newsvendor/core_math.hpp"
#include "newsvendor/losses.hpp"

namespace newsvendor {

/// Feed-forward network with sigmoid hidden layers and an identity output.
///
/// The raw network output lives in scaled demand units: predictions are the
/// raw output divided by `demand_scale`, so a network trained towards
/// d * demand_scale reports orders in the original demand units. All losses
/// and gradients are taken in original demand units.
///
/// Parameters flatten layer by layer as W (row-major) followed by b.
class MlpModel {
 public:
  /// Zero weights and biases. `layer_sizes` is {inputs, hidden..., outputs}
  /// and needs at least one hidden layer.
  MlpModel(std::vector<std::size_t> layer_sizes, double demand_scale);

  /// Glorot-uniform weights, zero biases.
  static MlpModel initialized(std::vector<std::size_t> layer_sizes, double demand_scale, Rng& rng);

  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t layer_count() const { return weights_.size(); }
  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  double demand_scale() const { return demand_scale_; }

  const Matrix& weights(std::size_t layer) const { return weights_[layer]; }
  Matrix& weights(std::size_t layer) { return weights_[layer]; }
  const std::vector<double>& biases(std::size_t layer) const { return biases_[layer]; }
  std::vector<double>& biases(std::size_t layer) { return biases_[layer]; }

  std::size_t parameter_count() const;
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> flat);
  /// 1 for entries of the flat vector that are weights, 0 for biases.
  std::vector<double> weight_mask() const;

  /// Predicted order vector for one feature vector.
  std::vector<double> predict(std::span<const double> x) const;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<Matrix> weights_;
  std::vector<std::vector<double>> biases_;
  double demand_scale_;
};

/// Per-layer gradients, shaped like the model's weights and biases.
struct MlpGradient {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  double loss = 0.0;

  std::vector<double> flatten() const;
};

std::vector<double> mlp_forward(const MlpModel& model, std::span<const double> x);

/// Exact reverse-mode gradient of loss(d, mlp_forward(model, x)).
MlpGradient mlp_backward(const MlpModel& model, std::span<const double> x,
                         std::span<const double> demand, const CostPair& cost, LossKind kind);

/// Order = intercept + weights . x, a single product.
class LinearModel {
 public:
  explicit LinearModel(std::size_t feature_count) : weights_(feature_count, 0.0) {}
  LinearModel(double intercept, std::vector<double> weights)
      : intercept_(intercept), weights_(std::move(weights)) {}

  std::size_t input_size() const { return weights_.size(); }
  std::size_t output_size() const { return 1; }
  double intercept() const { return intercept_; }
  const std::vector<double>& weights() const { return weights_; }

  std::size_t parameter_count() const { return weights_.size() + 1; }
  /// Flat layout {intercept, weights...}.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> flat);
  std::vector<double> weight_mask() const;

  std::vector<double> predict(std::span<const double> x) const;

  friend bool operator==(const LinearModel&, const LinearModel&) = default;

 private:
  double intercept_ = 0.0;
  std::vector<double> weights_;
};

double linear_forward(const LinearModel& model, std::span<const double> x);

/// Gradient of loss(d, linear_forward(model, x)) in the flat parameter
/// layout, with the loss value written to `loss`.
std::vector<double> linear_backward(const LinearModel& model, std::span<const double> x,
                                    std::span<const double> demand, const CostPair& cost,
                                    LossKind kind, double& loss);

/// Critical-fractile order for normally distributed demand.
double classical_normal_order(double mu, double sigma, const CostPair& cost);

/// Smallest sample value whose empirical CDF reaches the critical fractile.
/// This minimizes the mean newsvendor cost over the sample.
double empirical_quantile_order(std::span<const double> demands, const CostPair& cost);

using AnyModel = std::variant<MlpModel, LinearModel>;

std::vector<double> predict(const AnyModel& model, std::span<const double> x);
std::size_t input_size(const AnyModel& model);
std::size_t output_size(const AnyModel& model);

/// Plain-text model document. Values are written in shortest round-trip
/// form so a reload reproduces predictions bit for bit.
void write_model(std::ostream& out, const AnyModel& model);
AnyModel read_model(std::istream& in);
void save_model(const std::string& path, const AnyModel& model);
AnyModel load_model(const std::string& path);

}  // namespace newsvendor
