#include "newsvendor/optim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "newsvendor/format.hpp"

namespace newsvendor {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Lbfgs ? "lbfgs" : "momentum";
}

OptimizerKind parse_optimizer_kind(std::string_view text) {
  if (text == "lbfgs") return OptimizerKind::Lbfgs;
  if (text == "momentum") return OptimizerKind::MomentumGd;
  throw std::invalid_argument(fmt::format("unknown optimizer '{}'", text));
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::GradientTolerance:
      return "gradient_tolerance";
    case StopReason::MaxIterations:
      return "max_iterations";
    case StopReason::LineSearchFailed:
      return "line_search_failed";
  }
  return "unknown";
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument(fmt::format("lambda {} must be >= 0", lambda));
  if (max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
  if (lbfgs_memory < 1) throw std::invalid_argument("lbfgs_memory must be at least 1");
  if (!(tolerance >= 0.0)) throw std::invalid_argument("tolerance must be >= 0");
  if (optimizer == OptimizerKind::MomentumGd) {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
  }
}

RegularizerValue regularizer(std::span<const Matrix> weights, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("regularizer: lambda must be >= 0");
  RegularizerValue out;
  for (const Matrix& w : weights) {
    Matrix g(w.rows(), w.cols());
    auto gv = g.values();
    auto wv = w.values();
    for (std::size_t i = 0; i < wv.size(); ++i) {
      out.value += wv[i] * wv[i];
      gv[i] = 2.0 * lambda * wv[i];
    }
    out.gradient.push_back(std::move(g));
  }
  out.value *= lambda;
  return out;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

LbfgsHistory::LbfgsHistory(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("LbfgsHistory: capacity must be at least 1");
}

bool LbfgsHistory::push(std::vector<double> s, std::vector<double> y) {
  require_same_length(s, y, "LbfgsHistory::push");
  const double sy = dot(s, y);
  if (!(sy > kCurvatureFloor)) return false;
  if (pairs_.size() == capacity_) pairs_.pop_front();
  pairs_.push_back(Pair{std::move(s), std::move(y), 1.0 / sy});
  return true;
}

std::vector<double> lbfgs_step(const LbfgsHistory& history, std::span<const double> grad) {
  std::vector<double> q(grad.begin(), grad.end());
  const auto& pairs = history.pairs();
  std::vector<double> alpha(pairs.size());
  for (std::size_t i = pairs.size(); i-- > 0;) {
    alpha[i] = pairs[i].rho * dot(pairs[i].s, q);
    for (std::size_t k = 0; k < q.size(); ++k) q[k] -= alpha[i] * pairs[i].y[k];
  }
  if (!pairs.empty()) {
    const auto& newest = pairs.back();
    const double gamma = dot(newest.s, newest.y) / dot(newest.y, newest.y);
    for (double& v : q) v *= gamma;
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double beta = pairs[i].rho * dot(pairs[i].y, q);
    for (std::size_t k = 0; k < q.size(); ++k) q[k] += pairs[i].s[k] * (alpha[i] - beta);
  }
  for (double& v : q) v = -v;
  return q;
}

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;

struct Trial {
  std::vector<double> x;
  std::vector<double> grad;
  double value = 0.0;
};

/// Backtracking from `step` until sufficient decrease holds. Non-finite trial
/// values count as a failed test. Returns false when every trial fails.
bool armijo_search(const Objective& objective, std::span<const double> x, double f,
                   std::span<const double> grad, std::span<const double> dir, double step,
                   Trial& trial, bool& saw_nonfinite) {
  const double slope = dot(grad, dir);
  trial.x.resize(x.size());
  trial.grad.resize(x.size());
  for (int i = 0; i < kMaxBacktracks; ++i, step *= 0.5) {
    for (std::size_t k = 0; k < x.size(); ++k) trial.x[k] = x[k] + step * dir[k];
    trial.value = objective(trial.x, trial.grad);
    if (!std::isfinite(trial.value) || !all_finite(trial.grad)) {
      saw_nonfinite = true;
      continue;
    }
    // strict decrease keeps round-off from accepting a zero-progress step
    if (trial.value < f && trial.value <= f + kArmijo * step * slope) return true;
  }
  return false;
}

MinimizeResult minimize_lbfgs(const Objective& objective, std::vector<double> x,
                              const TrainConfig& cfg) {
  MinimizeResult result;
  std::vector<double> grad(x.size());
  double f = objective(x, grad);
  if (!std::isfinite(f) || !all_finite(grad)) {
    throw TrainingError(0, "non-finite objective at the starting point");
  }
  result.initial_value = f;

  LbfgsHistory history(cfg.lbfgs_memory);
  Trial trial;
  result.stop = StopReason::MaxIterations;
  for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
    if (inf_norm(grad) < cfg.tolerance) {
      result.stop = StopReason::GradientTolerance;
      break;
    }
    std::vector<double> dir = lbfgs_step(history, grad);
    bool steepest = history.size() == 0;
    if (!(dot(dir, grad) < 0.0)) {
      history.clear();
      dir = lbfgs_step(history, grad);
      steepest = true;
    }
    const double first_step = steepest ? std::min(1.0, 1.0 / inf_norm(grad)) : 1.0;
    bool saw_nonfinite = false;
    bool accepted = armijo_search(objective, x, f, grad, dir, first_step, trial, saw_nonfinite);
    if (!accepted && !steepest) {
      history.clear();
      dir = lbfgs_step(history, grad);
      accepted = armijo_search(objective, x, f, grad, dir, std::min(1.0, 1.0 / inf_norm(grad)),
                               trial, saw_nonfinite);
    }
    if (!accepted) {
      if (saw_nonfinite) {
        throw TrainingError(iter, fmt::format("objective became non-finite at iteration {}", iter));
      }
      result.stop = StopReason::LineSearchFailed;
      break;
    }

    std::vector<double> s(x.size());
    std::vector<double> y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      s[k] = trial.x[k] - x[k];
      y[k] = trial.grad[k] - grad[k];
    }
    history.push(std::move(s), std::move(y));
    std::swap(x, trial.x);
    std::swap(grad, trial.grad);
    f = trial.value;
    result.trace.push_back(f);
    result.iterations = iter;
  }
  result.x = std::move(x);
  return result;
}

// Heavy-ball descent. The returned point is the best iterate seen and the
// trace records the running best, so it never increases.
MinimizeResult minimize_momentum(const Objective& objective, std::vector<double> x,
                                 const TrainConfig& cfg) {
  MinimizeResult result;
  std::vector<double> grad(x.size());
  double f = objective(x, grad);
  if (!std::isfinite(f) || !all_finite(grad)) {
    throw TrainingError(0, "non-finite objective at the starting point");
  }
  result.initial_value = f;
  std::vector<double> best = x;
  double best_f = f;
  std::vector<double> velocity(x.size(), 0.0);
  result.stop = StopReason::MaxIterations;
  for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
    if (inf_norm(grad) < cfg.tolerance) {
      result.stop = StopReason::GradientTolerance;
      break;
    }
    for (std::size_t k = 0; k < x.size(); ++k) {
      velocity[k] = cfg.momentum * velocity[k] - cfg.learning_rate * grad[k];
      x[k] += velocity[k];
    }
    f = objective(x, grad);
    if (!std::isfinite(f) || !all_finite(grad)) {
      throw TrainingError(iter, fmt::format("objective became non-finite at iteration {}", iter));
    }
    if (f < best_f) {
      best_f = f;
      best = x;
    }
    result.trace.push_back(best_f);
    result.iterations = iter;
  }
  result.x = std::move(best);
  return result;
}

}  // namespace

MinimizeResult minimize(const Objective& objective, std::vector<double> x0, const TrainConfig& cfg) {
  cfg.validate();
  return cfg.optimizer == OptimizerKind::Lbfgs ? minimize_lbfgs(objective, std::move(x0), cfg)
                                               : minimize_momentum(objective, std::move(x0), cfg);
}

namespace {

void check_shapes(std::size_t inputs, std::size_t outputs, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (data.feature_count() != inputs || data.product_count() != outputs) {
    throw std::invalid_argument(
        fmt::format("train: model maps {} features to {} products but the data has {} and {}",
                    inputs, outputs, data.feature_count(), data.product_count()));
  }
}

double add_weight_penalty(std::span<const double> params, std::span<const double> mask,
                          double lambda, std::span<double> grad) {
  double penalty = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (mask[k] == 0.0) continue;
    penalty += params[k] * params[k];
    grad[k] += 2.0 * lambda * params[k];
  }
  return lambda * penalty;
}

}  // namespace

double training_objective(const MlpModel& model, const Dataset& data, const CostPair& cost,
                          LossKind kind, double lambda, std::span<double> grad) {
  check_shapes(model.input_size(), model.output_size(), data);
  if (grad.size() != model.parameter_count()) {
    throw std::invalid_argument("training_objective: gradient buffer has the wrong size");
  }
  std::fill(grad.begin(), grad.end(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto sample = mlp_backward(model, data.features.row(i), data.demands.row(i), cost, kind);
    total += sample.loss;
    std::size_t at = 0;
    for (std::size_t l = 0; l < sample.weights.size(); ++l) {
      for (double g : sample.weights[l].values()) grad[at++] += g;
      for (double g : sample.biases[l]) grad[at++] += g;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (double& g : grad) g *= inv_n;
  return total * inv_n + add_weight_penalty(model.parameters(), model.weight_mask(), lambda, grad);
}

double training_objective(const LinearModel& model, const Dataset& data, const CostPair& cost,
                          LossKind kind, double lambda, std::span<double> grad) {
  check_shapes(model.input_size(), model.output_size(), data);
  if (grad.size() != model.parameter_count()) {
    throw std::invalid_argument("training_objective: gradient buffer has the wrong size");
  }
  std::fill(grad.begin(), grad.end(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double loss = 0.0;
    const auto g = linear_backward(model, data.features.row(i), data.demands.row(i), cost, kind, loss);
    total += loss;
    for (std::size_t k = 0; k < g.size(); ++k) grad[k] += g[k];
  }
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (double& g : grad) g *= inv_n;
  return total * inv_n + add_weight_penalty(model.parameters(), model.weight_mask(), lambda, grad);
}

namespace {

template <class Model>
TrainReport<Model> train_model(const Model& start, const Dataset& data, const CostPair& cost,
                               LossKind kind, const TrainConfig& cfg) {
  cfg.validate();
  check_shapes(start.input_size(), start.output_size(), data);
  Model work = start;
  Objective objective = [&](std::span<const double> params, std::span<double> grad) {
    work.set_parameters(params);
    return training_objective(work, data, cost, kind, cfg.lambda, grad);
  };
  auto result = minimize(objective, start.parameters(), cfg);
  Model trained = start;
  trained.set_parameters(result.x);
  return TrainReport<Model>{std::move(trained), result.initial_value, std::move(result.trace),
                            result.iterations, result.stop};
}

}  // namespace

TrainReport<MlpModel> train(const MlpModel& model, const Dataset& data, const CostPair& cost,
                            LossKind kind, const TrainConfig& cfg) {
  return train_model(model, data, cost, kind, cfg);
}

TrainReport<LinearModel> train(const LinearModel& model, const Dataset& data,
                               const CostPair& cost, LossKind kind, const TrainConfig& cfg) {
  return train_model(model, data, cost, kind, cfg);
}

void write_trace_csv(const std::string& path, double initial, std::span<const double> trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  out << "iteration,objective\n";
  out << "0," << format_double(initial) << '\n';
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out << i + 1 << ',' << format_double(trace[i]) << '\n';
  }
}

}  // namespace newsvendor
