#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "newsvendor/core_math.hpp"
#include "newsvendor/data.hpp"
#include "newsvendor/losses.hpp"
#include "newsvendor/models.hpp"

namespace newsvendor {

enum class OptimizerKind { Lbfgs, MomentumGd };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view text);

struct TrainConfig {
  double lambda = 1e-3;
  std::size_t max_iters = 2000;
  /// Stop once the gradient infinity-norm drops below this.
  double tolerance = 1e-6;
  std::size_t lbfgs_memory = 10;
  std::uint64_t seed = 1;
  OptimizerKind optimizer = OptimizerKind::Lbfgs;
  double learning_rate = 0.01;
  double momentum = 0.9;

  /// Throws std::invalid_argument on a negative lambda, zero iteration
  /// budget or zero memory.
  void validate() const;
};

enum class StopReason { GradientTolerance, MaxIterations, LineSearchFailed };

std::string_view to_string(StopReason reason);

/// Thrown when the objective or its gradient stops being finite.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t iteration, const std::string& what)
      : std::runtime_error(what), iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

struct RegularizerValue {
  double value = 0.0;
  std::vector<Matrix> gradient;
};

/// lambda * sum of squared weights, with gradient 2 * lambda * w.
RegularizerValue regularizer(std::span<const Matrix> weights, double lambda);

/// Bounded history of curvature pairs (s = x_{k+1} - x_k, y = g_{k+1} - g_k).
class LbfgsHistory {
 public:
  explicit LbfgsHistory(std::size_t capacity);

  /// Stores the pair when s.y exceeds the curvature floor, evicting the
  /// oldest pair when full. Returns whether the pair was kept.
  bool push(std::vector<double> s, std::vector<double> y);
  void clear() { pairs_.clear(); }

  std::size_t size() const { return pairs_.size(); }
  std::size_t capacity() const { return capacity_; }

  static constexpr double kCurvatureFloor = 1e-10;

  struct Pair {
    std::vector<double> s;
    std::vector<double> y;
    double rho;  // 1 / (s.y)
  };
  const std::deque<Pair>& pairs() const { return pairs_; }

 private:
  std::size_t capacity_;
  std::deque<Pair> pairs_;
};

/// Two-loop recursion: -H g for the implicit inverse-Hessian estimate H,
/// with initial scaling s.y / y.y from the newest pair. Empty history gives -g.
std::vector<double> lbfgs_step(const LbfgsHistory& history, std::span<const double> grad);

/// Objective value at x; the gradient is written into `grad`.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct MinimizeResult {
  std::vector<double> x;
  double initial_value = 0.0;
  /// Objective after each completed iteration.
  std::vector<double> trace;
  std::size_t iterations = 0;
  StopReason stop = StopReason::MaxIterations;
};

/// Unconstrained minimization with L-BFGS plus Armijo backtracking, or with
/// heavy-ball gradient descent, as cfg.optimizer selects. cfg.lambda is not
/// used here.
MinimizeResult minimize(const Objective& objective, std::vector<double> x0, const TrainConfig& cfg);

template <class Model>
struct TrainReport {
  Model model;
  double initial_objective = 0.0;
  std::vector<double> loss_trace;
  std::size_t iterations = 0;
  StopReason stop = StopReason::MaxIterations;

  double final_objective() const {
    return loss_trace.empty() ? initial_objective : loss_trace.back();
  }
};

/// Mean per-sample loss over `data` plus the weight regularizer, value and
/// gradient in the model's flat parameter layout.
double training_objective(const MlpModel& model, const Dataset& data, const CostPair& cost,
                          LossKind kind, double lambda, std::span<double> grad);
double training_objective(const LinearModel& model, const Dataset& data, const CostPair& cost,
                          LossKind kind, double lambda, std::span<double> grad);

TrainReport<MlpModel> train(const MlpModel& model, const Dataset& data, const CostPair& cost,
                            LossKind kind, const TrainConfig& cfg);
TrainReport<LinearModel> train(const LinearModel& model, const Dataset& data,
                               const CostPair& cost, LossKind kind, const TrainConfig& cfg);

/// Writes "iteration,objective" rows, iteration 0 being the starting point.
void write_trace_csv(const std::string& path, double initial, std::span<const double> trace);

}  // namespace newsvendor
