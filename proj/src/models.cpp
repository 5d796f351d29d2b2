#include "newsvendor/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace newsvendor {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_input(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw std::invalid_argument(
        fmt::format("{}: expected {} features, got {}", what, expected, got));
  }
}

}  // namespace

MlpModel::MlpModel(std::vector<std::size_t> layer_sizes, double demand_scale)
    : sizes_(std::move(layer_sizes)), demand_scale_(demand_scale) {
  if (sizes_.size() < 3) {
    throw std::invalid_argument("MlpModel: need input, at least one hidden, and output layer");
  }
  if (std::find(sizes_.begin(), sizes_.end(), 0u) != sizes_.end()) {
    throw std::invalid_argument("MlpModel: layer sizes must be positive");
  }
  if (!(demand_scale_ > 0.0) || !std::isfinite(demand_scale_)) {
    throw std::invalid_argument(fmt::format("MlpModel: demand_scale {} must be positive", demand_scale_));
  }
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    weights_.emplace_back(sizes_[l + 1], sizes_[l]);
    biases_.emplace_back(sizes_[l + 1], 0.0);
  }
}

MlpModel MlpModel::initialized(std::vector<std::size_t> layer_sizes, double demand_scale,
                               Rng& rng) {
  MlpModel model(std::move(layer_sizes), demand_scale);
  for (auto& w : model.weights_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (double& v : w.values()) v = rng.uniform(-limit, limit);
  }
  return model;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

std::vector<double> MlpModel::parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    auto w = weights_[l].values();
    flat.insert(flat.end(), w.begin(), w.end());
    flat.insert(flat.end(), biases_[l].begin(), biases_[l].end());
  }
  return flat;
}

void MlpModel::set_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw std::invalid_argument(fmt::format("MlpModel::set_parameters: expected {} values, got {}",
                                            parameter_count(), flat.size()));
  }
  std::size_t at = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (double& v : weights_[l].values()) v = flat[at++];
    for (double& v : biases_[l]) v = flat[at++];
  }
}

std::vector<double> MlpModel::weight_mask() const {
  std::vector<double> mask;
  mask.reserve(parameter_count());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    mask.insert(mask.end(), weights_[l].size(), 1.0);
    mask.insert(mask.end(), biases_[l].size(), 0.0);
  }
  return mask;
}

std::vector<double> MlpModel::predict(std::span<const double> x) const {
  return mlp_forward(*this, x);
}

std::vector<double> MlpGradient::flatten() const {
  std::vector<double> flat;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    auto w = weights[l].values();
    flat.insert(flat.end(), w.begin(), w.end());
    flat.insert(flat.end(), biases[l].begin(), biases[l].end());
  }
  return flat;
}

namespace {

/// Activations per layer; activations[0] is the input, the last entry is the
/// raw (scaled) output.
std::vector<std::vector<double>> forward_pass(const MlpModel& model, std::span<const double> x) {
  check_input(model.input_size(), x.size(), "mlp_forward");
  std::vector<std::vector<double>> acts;
  acts.reserve(model.layer_count() + 1);
  acts.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    auto z = mat_vec(model.weights(l), acts.back());
    const auto& b = model.biases(l);
    const bool hidden = l + 1 < model.layer_count();
    for (std::size_t i = 0; i < z.size(); ++i) {
      z[i] += b[i];
      if (hidden) z[i] = sigmoid(z[i]);
    }
    acts.push_back(std::move(z));
  }
  return acts;
}

}  // namespace

std::vector<double> mlp_forward(const MlpModel& model, std::span<const double> x) {
  auto out = std::move(forward_pass(model, x).back());
  for (double& v : out) v /= model.demand_scale();
  return out;
}

MlpGradient mlp_backward(const MlpModel& model, std::span<const double> x,
                         std::span<const double> demand, const CostPair& cost, LossKind kind) {
  if (demand.size() != model.output_size()) {
    throw std::invalid_argument(fmt::format("mlp_backward: model has {} outputs, demand has {}",
                                            model.output_size(), demand.size()));
  }
  const auto acts = forward_pass(model, x);
  std::vector<double> prediction = acts.back();
  for (double& v : prediction) v /= model.demand_scale();

  MlpGradient grad;
  grad.loss = loss_value(demand, prediction, cost, kind);
  grad.weights.resize(model.layer_count());
  grad.biases.resize(model.layer_count());

  // delta holds dLoss/dz for the pre-activation of the current layer
  std::vector<double> delta = loss_grad(demand, prediction, cost, kind);
  for (double& v : delta) v /= model.demand_scale();

  for (std::size_t l = model.layer_count(); l-- > 0;) {
    const auto& input = acts[l];
    const Matrix& w = model.weights(l);
    Matrix gw(w.rows(), w.cols());
    for (std::size_t r = 0; r < w.rows(); ++r) {
      auto row = gw.row(r);
      for (std::size_t c = 0; c < w.cols(); ++c) row[c] = delta[r] * input[c];
    }
    grad.weights[l] = std::move(gw);
    grad.biases[l] = delta;
    if (l == 0) break;

    std::vector<double> next(w.cols(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
      auto row = w.row(r);
      for (std::size_t c = 0; c < w.cols(); ++c) next[c] += row[c] * delta[r];
    }
    // input is a sigmoid output a, and da/dz = a (1 - a)
    for (std::size_t c = 0; c < next.size(); ++c) next[c] *= input[c] * (1.0 - input[c]);
    delta = std::move(next);
  }
  return grad;
}

std::vector<double> LinearModel::parameters() const {
  std::vector<double> flat{intercept_};
  flat.insert(flat.end(), weights_.begin(), weights_.end());
  return flat;
}

void LinearModel::set_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw std::invalid_argument(fmt::format(
        "LinearModel::set_parameters: expected {} values, got {}", parameter_count(), flat.size()));
  }
  intercept_ = flat[0];
  std::copy(flat.begin() + 1, flat.end(), weights_.begin());
}

std::vector<double> LinearModel::weight_mask() const {
  std::vector<double> mask(parameter_count(), 1.0);
  mask[0] = 0.0;
  return mask;
}

std::vector<double> LinearModel::predict(std::span<const double> x) const {
  return {linear_forward(*this, x)};
}

double linear_forward(const LinearModel& model, std::span<const double> x) {
  check_input(model.input_size(), x.size(), "linear_forward");
  double y = model.intercept();
  for (std::size_t j = 0; j < x.size(); ++j) y += model.weights()[j] * x[j];
  return y;
}

std::vector<double> linear_backward(const LinearModel& model, std::span<const double> x,
                                    std::span<const double> demand, const CostPair& cost,
                                    LossKind kind, double& loss) {
  if (demand.size() != 1) {
    throw std::invalid_argument(
        fmt::format("linear_backward: linear model predicts 1 product, demand has {}", demand.size()));
  }
  const double y = linear_forward(model, x);
  const std::span<const double> order(&y, 1);
  loss = loss_value(demand, order, cost, kind);
  const double g = loss_grad(demand, order, cost, kind)[0];
  std::vector<double> grad(model.parameter_count());
  grad[0] = g;
  for (std::size_t j = 0; j < x.size(); ++j) grad[j + 1] = g * x[j];
  return grad;
}

double classical_normal_order(double mu, double sigma, const CostPair& cost) {
  if (!(sigma > 0.0)) {
    throw std::invalid_argument(fmt::format("classical_normal_order: sigma {} must be positive", sigma));
  }
  return mu + sigma * std_normal_inv_cdf(cost.critical_fractile());
}

double empirical_quantile_order(std::span<const double> demands, const CostPair& cost) {
  if (demands.empty()) throw std::invalid_argument("empirical_quantile_order: empty sample");
  std::vector<double> sorted(demands.begin(), demands.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // relative slack keeps fractile * n from landing just above an exact count
  const double needed = cost.critical_fractile() * n * (1.0 - 1e-12);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    // skip to the last copy of a repeated value so the count includes all of them
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    if (static_cast<double>(i + 1) >= needed) return sorted[i];
  }
  return sorted.back();
}

std::vector<double> predict(const AnyModel& model, std::span<const double> x) {
  return std::visit([&](const auto& m) { return m.predict(x); }, model);
}

std::size_t input_size(const AnyModel& model) {
  return std::visit([](const auto& m) { return m.input_size(); }, model);
}

std::size_t output_size(const AnyModel& model) {
  return std::visit([](const auto& m) { return m.output_size(); }, model);
}

}  // namespace newsvendor
