#include "newsvendor/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/ranges.h>

#include "newsvendor/format.hpp"

namespace newsvendor {

ModelSpec ModelSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw std::invalid_argument(fmt::format("model spec '{}' must look like mlp:3,10,10,1 or linear:3", text));
  }
  const std::string head = text.substr(0, colon);
  std::vector<std::size_t> sizes;
  std::istringstream body(text.substr(colon + 1));
  std::string part;
  while (std::getline(body, part, ',')) {
    std::size_t pos = 0;
    long long v = -1;
    try {
      v = std::stoll(part, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != part.size() || v <= 0) {
      throw std::invalid_argument(fmt::format("model spec '{}': bad layer size '{}'", text, part));
    }
    sizes.push_back(static_cast<std::size_t>(v));
  }
  ModelSpec spec;
  if (head == "mlp") {
    if (sizes.size() < 3) {
      throw std::invalid_argument(fmt::format("model spec '{}': need n,hidden...,m", text));
    }
    spec.kind = Kind::Mlp;
  } else if (head == "linear") {
    if (sizes.size() != 1) throw std::invalid_argument(fmt::format("model spec '{}': expected linear:n", text));
    spec.kind = Kind::Linear;
    sizes.push_back(1);
  } else {
    throw std::invalid_argument(fmt::format("model spec '{}': unknown model '{}'", text, head));
  }
  spec.layer_sizes = std::move(sizes);
  return spec;
}

std::string ModelSpec::to_string() const {
  if (kind == Kind::Linear) return fmt::format("linear:{}", layer_sizes.front());
  return fmt::format("mlp:{}", fmt::join(layer_sizes, ","));
}

AnyModel ModelSpec::instantiate(std::uint64_t seed) const {
  if (kind == Kind::Linear) return LinearModel(layer_sizes.front());
  Rng rng(seed);
  return MlpModel::initialized(layer_sizes, demand_scale, rng);
}

std::vector<double> ratio_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) {
    throw std::invalid_argument(fmt::format("ratio grid {}:{}:{} is empty", lo, hi, step));
  }
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) grid[i] = lo + static_cast<double>(i) * step;
  return grid;
}

void SweepConfig::validate() const {
  if (!(ch > 0.0)) throw std::invalid_argument("sweep: ch must be positive");
  if (ratios.empty()) throw std::invalid_argument("sweep: no ratios");
  for (double r : ratios) {
    if (!(r >= 1.0)) throw std::invalid_argument(fmt::format("sweep: ratio {} is below 1", r));
  }
  if (kinds.empty()) throw std::invalid_argument("sweep: no loss kinds");
  train.validate();
}

TrainedCell train_any(const AnyModel& start, const Dataset& data, const CostPair& cost,
                      LossKind kind, const TrainConfig& cfg) {
  return std::visit(
      [&](const auto& model) {
        auto report = train(model, data, cost, kind, cfg);
        const double final_objective = report.final_objective();
        return TrainedCell{AnyModel(std::move(report.model)), report.iterations, report.stop,
                           report.initial_objective, final_objective, std::move(report.loss_trace)};
      },
      start);
}

namespace {

struct AnyPredictor {
  const AnyModel& model;
  std::vector<double> predict(std::span<const double> x) const { return newsvendor::predict(model, x); }
};

}  // namespace

SweepResult run_sweep(const SweepConfig& cfg, const Dataset& train, const Dataset& test) {
  cfg.validate();
  if (train.size() == 0 || test.size() == 0) throw std::invalid_argument("sweep: empty dataset");
  const AnyModel start = cfg.model.instantiate(cfg.seed);
  SweepResult result;
  for (double ratio : cfg.ratios) {
    const CostPair cost(cfg.ch * ratio, cfg.ch);
    for (LossKind kind : cfg.kinds) {
      const auto t0 = std::chrono::steady_clock::now();
      TrainedCell cell = [&] {
        try {
          return train_any(start, train, cost, kind, cfg.train);
        } catch (const TrainingError& e) {
          throw TrainingError(e.iteration(), fmt::format("ratio {}, {} loss: {}", ratio,
                                                         to_string(kind), e.what()));
        }
      }();
      const auto t1 = std::chrono::steady_clock::now();
      const AnyPredictor predictor{cell.model};
      const double wall =
          cfg.record_time ? std::chrono::duration<double, std::milli>(t1 - t0).count() : 0.0;
      result.rows.push_back(SweepRow{ratio, kind, train_err(predictor, train),
                                     test_err(predictor, test), wall});
    }
  }
  return result;
}

void write_sweep_csv(const std::string& path, const SweepResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  out << "ratio,kind,train_err,test_err,wall_ms\n";
  for (const auto& row : result.rows) {
    out << format_double(row.ratio) << ',' << to_string(row.kind) << ','
        << format_double(row.train_err) << ',' << format_double(row.test_err) << ','
        << format_double(row.wall_ms) << '\n';
  }
}

PredictionDump dump_predictions(const std::map<LossKind, AnyModel>& models, const Dataset& train,
                                std::size_t k) {
  if (k == 0) throw std::invalid_argument("dump_predictions: k must be at least 1");
  if (k > train.size()) {
    throw std::invalid_argument(
        fmt::format("dump_predictions: k = {} exceeds {} training rows", k, train.size()));
  }
  PredictionDump dump;
  for (const auto& [kind, model] : models) dump.kinds.push_back(kind);
  for (std::size_t i = 0; i < k; ++i) {
    PredictionRow row{i, train.demands(i, 0), {}};
    for (const auto& [kind, model] : models) row.predictions[kind] = predict(model, train.features.row(i))[0];
    dump.rows.push_back(std::move(row));
  }
  return dump;
}

void write_prediction_csv(const std::string& path, const PredictionDump& dump) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  out << "index,demand,pred_original,pred_quadratic\n";
  for (const auto& row : dump.rows) {
    out << row.index << ',' << format_double(row.demand);
    for (LossKind kind : {LossKind::Original, LossKind::Quadratic}) {
      out << ',';
      if (auto it = row.predictions.find(kind); it != row.predictions.end()) {
        out << format_double(it->second);
      }
    }
    out << '\n';
  }
}

std::string_view to_string(RobustnessVerdict verdict) {
  switch (verdict) {
    case RobustnessVerdict::OriginalBetter:
      return "original_better";
    case RobustnessVerdict::QuadraticBetter:
      return "quadratic_better";
    case RobustnessVerdict::Tie:
      return "tie";
  }
  return "unknown";
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

RobustnessSummary robustness_report(const std::vector<bool>& outlier_mask,
                                    const std::map<LossKind, std::vector<double>>& predictions,
                                    std::span<const double> demands) {
  if (outlier_mask.size() != demands.size()) {
    throw std::invalid_argument(fmt::format("robustness_report: mask has {} rows, demands {}",
                                            outlier_mask.size(), demands.size()));
  }
  if (std::all_of(outlier_mask.begin(), outlier_mask.end(), [](bool b) { return b; })) {
    throw std::invalid_argument("robustness_report: every row is masked as an outlier");
  }
  RobustnessSummary summary{};
  for (const auto& [kind, pred] : predictions) {
    if (pred.size() != demands.size()) {
      throw std::invalid_argument(fmt::format("robustness_report: {} predictions for {} rows",
                                              pred.size(), demands.size()));
    }
    std::vector<double> clean;
    std::vector<double> outliers;
    for (std::size_t i = 0; i < demands.size(); ++i) {
      (outlier_mask[i] ? outliers : clean).push_back(std::abs(pred[i] - demands[i]));
    }
    summary.per_kind[kind] = {median(std::move(clean)),
                              outliers.empty() ? std::numeric_limits<double>::quiet_NaN()
                                               : median(std::move(outliers))};
  }
  summary.verdict = RobustnessVerdict::Tie;
  auto orig = summary.per_kind.find(LossKind::Original);
  auto quad = summary.per_kind.find(LossKind::Quadratic);
  if (orig != summary.per_kind.end() && quad != summary.per_kind.end()) {
    const double a = orig->second.clean_median_abs_error;
    const double b = quad->second.clean_median_abs_error;
    if (a < b) summary.verdict = RobustnessVerdict::OriginalBetter;
    if (b < a) summary.verdict = RobustnessVerdict::QuadraticBetter;
  }
  return summary;
}

}  // namespace newsvendor
