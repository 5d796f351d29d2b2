#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "newsvendor/data.hpp"
#include "newsvendor/losses.hpp"
#include "newsvendor/models.hpp"
#include "newsvendor/optim.hpp"

namespace newsvendor {

template <class M>
concept Predictor = requires(const M& m, std::span<const double> x) {
  { m.predict(x) } -> std::convertible_to<std::vector<double>>;
};

/// Mean over rows of the squared L2 distance between prediction and demand,
/// in demand units.
template <Predictor M>
double mean_squared_error(const M& model, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("mean_squared_error: empty dataset");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto pred = model.predict(data.features.row(i));
    const auto d = data.demands.row(i);
    if (pred.size() != d.size()) {
      throw std::invalid_argument(fmt::format(
          "mean_squared_error: model predicts {} products, data has {}", pred.size(), d.size()));
    }
    for (std::size_t k = 0; k < d.size(); ++k) total += (pred[k] - d[k]) * (pred[k] - d[k]);
  }
  return total / static_cast<double>(data.size());
}

template <Predictor M>
double test_err(const M& model, const Dataset& test) {
  return mean_squared_error(model, test);
}

template <Predictor M>
double train_err(const M& model, const Dataset& train) {
  return mean_squared_error(model, train);
}

/// Model architecture for sweep cells.
struct ModelSpec {
  enum class Kind { Mlp, Linear };
  Kind kind = Kind::Mlp;
  /// {inputs, hidden..., outputs}; ignored for linear models.
  std::vector<std::size_t> layer_sizes{3, 10, 10, 1};
  double demand_scale = 1.0 / 66.0;

  /// Grammar "mlp:n,h1,...,m" or "linear:n".
  static ModelSpec parse(const std::string& text);
  std::string to_string() const;
  std::size_t input_size() const { return layer_sizes.front(); }

  /// Fresh model, MLP weights drawn from `seed`.
  AnyModel instantiate(std::uint64_t seed) const;
};

/// lo, lo + step, ... up to hi inclusive (with a small tolerance on hi).
std::vector<double> ratio_grid(double lo, double hi, double step);

struct SweepConfig {
  double ch = 1.5;
  std::vector<double> ratios = ratio_grid(1.0, 10.0, 0.5);
  std::vector<LossKind> kinds{LossKind::Original, LossKind::Quadratic};
  ModelSpec model;
  TrainConfig train;
  /// Initialization seed shared by every cell.
  std::uint64_t seed = 1;
  /// Record wall-clock time per cell; off keeps results byte-reproducible.
  bool record_time = false;

  void validate() const;
};

struct SweepRow {
  double ratio;
  LossKind kind;
  double train_err;
  double test_err;
  double wall_ms;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

/// Fits one model per (ratio, kind) at cp = ch * ratio from the same initial
/// weights and records TrainErr/TestErr. Rows are ratio-major in grid order.
SweepResult run_sweep(const SweepConfig& cfg, const Dataset& train, const Dataset& test);

/// Header "ratio,kind,train_err,test_err,wall_ms".
void write_sweep_csv(const std::string& path, const SweepResult& result);

struct TrainedCell {
  AnyModel model;
  std::size_t iterations;
  StopReason stop;
  double initial_objective;
  double final_objective;
  std::vector<double> trace;
};

/// Trains `start` under one loss, dispatching on the model type.
TrainedCell train_any(const AnyModel& start, const Dataset& data, const CostPair& cost,
                      LossKind kind, const TrainConfig& cfg);

struct PredictionRow {
  std::size_t index;
  double demand;
  std::map<LossKind, double> predictions;
};

struct PredictionDump {
  std::vector<LossKind> kinds;
  std::vector<PredictionRow> rows;
};

/// First `k` training rows (first product) with every model's prediction.
PredictionDump dump_predictions(const std::map<LossKind, AnyModel>& models, const Dataset& train,
                                std::size_t k = 50);

/// Header "index,demand,pred_original,pred_quadratic"; a kind that was not
/// dumped leaves its column empty.
void write_prediction_csv(const std::string& path, const PredictionDump& dump);

enum class RobustnessVerdict { OriginalBetter, QuadraticBetter, Tie };

std::string_view to_string(RobustnessVerdict verdict);

struct RobustnessSummary {
  struct PerKind {
    double clean_median_abs_error;
    /// NaN when no row is an outlier.
    double outlier_median_abs_error;
  };
  std::map<LossKind, PerKind> per_kind;
  RobustnessVerdict verdict;
};

/// Median absolute error per loss kind on clean rows (mask false) and on
/// outlier rows (mask true). The verdict compares clean-row medians of the
/// Original and Quadratic kinds.
RobustnessSummary robustness_report(const std::vector<bool>& outlier_mask,
                                    const std::map<LossKind, std::vector<double>>& predictions,
                                    std::span<const double> demands);

double median(std::vector<double> values);

}  // namespace newsvendor
