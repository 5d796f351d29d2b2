// newsvendor: dataset generation, training, cost-ratio sweeps and evaluation.
//
// Every command writes its artifacts plus a manifest.json into --out (or
// $NEWSVENDOR_OUT_DIR). `replay --manifest m.json --out dir` re-runs the
// recorded command into another directory.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "newsvendor/data.hpp"
#include "newsvendor/experiments.hpp"
#include "newsvendor/format.hpp"
#include "newsvendor/models.hpp"
#include "newsvendor/optim.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace newsvendor;

namespace {

constexpr const char* kToolVersion = "1.0.0";
constexpr const char* kOutEnv = "NEWSVENDOR_OUT_DIR";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Accumulates the manifest and the artifacts written so far.
class Run {
 public:
  Run(std::string command, std::vector<std::string> args, fs::path out)
      : out_(std::move(out)) {
    manifest_["tool"] = "newsvendor";
    manifest_["version"] = kToolVersion;
    manifest_["command"] = std::move(command);
    manifest_["args"] = std::move(args);
    manifest_["config"] = json::object();
    manifest_["artifacts"] = json::array();
  }

  fs::path artifact(const std::string& name) {
    manifest_["artifacts"].push_back(name);
    return out_ / name;
  }
  json& config() { return manifest_["config"]; }
  json& results() { return manifest_["results"]; }
  void set_seed(std::uint64_t seed) { manifest_["seed"] = seed; }

  void finish() {
    std::ofstream out(out_ / "manifest.json");
    out << manifest_.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed to write manifest.json");
  }

 private:
  fs::path out_;
  json manifest_;
};

/// Options shared by train and sweep.
struct ModelOptions {
  std::string model = "mlp";
  double scale = 1.0 / 66.0;
  double lambda = 1e-3;
  std::size_t max_iters = 2000;
  double tolerance = 1e-6;
  std::size_t memory = 10;
  std::string optimizer = "lbfgs";
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  double ch = 1.5;

  void add_to(CLI::App& app) {
    app.add_option("--model", model,
                   "mlp:n,h1,...,m | linear:n | mlp (n-282-60-m sized from the data)")
        ->capture_default_str();
    app.add_option("--scale", scale, "MLP order = raw output / scale")
        ->capture_default_str();
    app.add_option("--lambda", lambda, "weight regularization")->capture_default_str();
    app.add_option("--max-iters", max_iters)->capture_default_str();
    app.add_option("--tol", tolerance, "gradient infinity-norm stop")->capture_default_str();
    app.add_option("--memory", memory, "L-BFGS history length")->capture_default_str();
    app.add_option("--optimizer", optimizer)->check(CLI::IsMember({"lbfgs", "momentum"}))->capture_default_str();
    app.add_option("--lr", learning_rate, "momentum descent step")->capture_default_str();
    app.add_option("--momentum", momentum)->capture_default_str();
    app.add_option("--seed", seed, "weight initialization seed")->capture_default_str();
    app.add_option("--ch", ch, "holding cost")->capture_default_str();
  }

  ModelSpec spec_for(const Dataset& data) const {
    ModelSpec spec = model == "mlp"
                         ? ModelSpec::parse(fmt::format("mlp:{},282,60,{}", data.feature_count(),
                                                        data.product_count()))
                         : ModelSpec::parse(model);
    spec.demand_scale = scale;
    if (spec.input_size() != data.feature_count() ||
        spec.layer_sizes.back() != data.product_count()) {
      throw UsageError(fmt::format("model {} does not fit data with {} features and {} products",
                                   spec.to_string(), data.feature_count(), data.product_count()));
    }
    return spec;
  }

  TrainConfig train_config() const {
    TrainConfig cfg;
    cfg.lambda = lambda;
    cfg.max_iters = max_iters;
    cfg.tolerance = tolerance;
    cfg.lbfgs_memory = memory;
    cfg.seed = seed;
    cfg.optimizer = parse_optimizer_kind(optimizer);
    cfg.learning_rate = learning_rate;
    cfg.momentum = momentum;
    return cfg;
  }

  void echo(json& cfg, const ModelSpec& spec) const {
    cfg["model"] = spec.to_string();
    cfg["demand_scale"] = scale;
    cfg["lambda"] = lambda;
    cfg["max_iters"] = max_iters;
    cfg["tolerance"] = tolerance;
    cfg["lbfgs_memory"] = memory;
    cfg["optimizer"] = optimizer;
    cfg["learning_rate"] = learning_rate;
    cfg["momentum"] = momentum;
    cfg["ch"] = ch;
  }
};

fs::path resolve_out(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutEnv); env != nullptr && *env != '\0') return env;
  throw UsageError(fmt::format("--out is required (or set {})", kOutEnv));
}

std::vector<std::string> strip_out(const std::vector<std::string>& args) {
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--out") {
      ++i;
      continue;
    }
    if (args[i].rfind("--out=", 0) == 0) continue;
    kept.push_back(args[i]);
  }
  return kept;
}

std::vector<double> parse_ratios(const std::string& text) {
  std::vector<double> parts;
  std::string piece;
  std::istringstream in(text);
  while (std::getline(in, piece, ':')) {
    try {
      parts.push_back(parse_double(piece));
    } catch (const std::invalid_argument&) {
      throw UsageError(fmt::format("--ratios '{}' must be lo:hi:step", text));
    }
  }
  if (parts.size() != 3) throw UsageError(fmt::format("--ratios '{}' must be lo:hi:step", text));
  return ratio_grid(parts[0], parts[1], parts[2]);
}

std::vector<LossKind> parse_kinds(const std::string& text) {
  std::vector<LossKind> kinds;
  std::string piece;
  std::istringstream in(text);
  while (std::getline(in, piece, ',')) {
    try {
      kinds.push_back(parse_loss_kind(piece));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (kinds.empty()) throw UsageError("--kinds needs at least one loss kind");
  return kinds;
}

void write_mask_csv(const fs::path& path, const std::vector<bool>& mask) {
  std::ofstream out(path);
  out << "index,outlier\n";
  for (std::size_t i = 0; i < mask.size(); ++i) out << i << ',' << (mask[i] ? 1 : 0) << '\n';
}

int run_cli(const std::vector<std::string>& args);

int dispatch(CLI::App& app, const std::vector<std::string>& args) {
  // gen
  auto* gen = app.add_subcommand("gen", "generate datasets");
  gen->require_subcommand(1);
  std::string out_flag;
  std::uint64_t gen_seed = 1;

  auto* table1 = gen->add_subcommand("table1", "the two-week train/test demand table");
  std::uint64_t table1_seed = kTable1Seed;
  table1->add_option("--seed", table1_seed, "seed for Weather/Promotion")->capture_default_str();
  table1->add_option("--out", out_flag, "output directory");

  auto* synthetic = gen->add_subcommand("synthetic", "uniform-demand synthetic days");
  SyntheticOptions synth;
  synthetic->add_option("--days", synth.days)->capture_default_str();
  synthetic->add_option("--lo", synth.demand_lo, "smallest demand")->capture_default_str();
  synthetic->add_option("--hi", synth.demand_hi, "largest demand")->capture_default_str();
  synthetic->add_option("--start-weekday", synth.start_weekday, "0 = Monday")->capture_default_str();
  synthetic->add_option("--seed", gen_seed)->capture_default_str();
  synthetic->add_option("--out", out_flag, "output directory");

  auto* blocks = gen->add_subcommand("blocks", "resample whole identical-feature blocks");
  std::string in_path;
  std::size_t block_count = 500;
  std::size_t demand_cols = 1;
  blocks->add_option("--in", in_path)->required();
  blocks->add_option("--count", block_count)->capture_default_str();
  blocks->add_option("--demand-cols", demand_cols)->capture_default_str();
  blocks->add_option("--seed", gen_seed)->capture_default_str();
  blocks->add_option("--out", out_flag, "output directory");

  auto* outliers = gen->add_subcommand("outliers", "multiply large demands in a random subset");
  std::size_t subset = 1000;
  double threshold = 60;
  double factor = 10;
  outliers->add_option("--in", in_path)->required();
  outliers->add_option("--subset", subset)->capture_default_str();
  outliers->add_option("--threshold", threshold)->capture_default_str();
  outliers->add_option("--factor", factor)->capture_default_str();
  outliers->add_option("--demand-cols", demand_cols)->capture_default_str();
  outliers->add_option("--seed", gen_seed)->capture_default_str();
  outliers->add_option("--out", out_flag, "output directory");

  // train
  auto* train_cmd = app.add_subcommand("train", "fit one model under one loss");
  ModelOptions mopt;
  std::string data_path;
  std::string loss = "original";
  double cp = 4.0;
  mopt.add_to(*train_cmd);
  train_cmd->add_option("--data", data_path)->required();
  train_cmd->add_option("--loss", loss)->check(CLI::IsMember({"original", "quadratic"}))->capture_default_str();
  train_cmd->add_option("--cp", cp, "shortage cost")->capture_default_str();
  train_cmd->add_option("--demand-cols", demand_cols)->capture_default_str();
  train_cmd->add_option("--out", out_flag, "output directory");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "train both losses across cp/ch ratios");
  ModelOptions sopt;
  std::string train_path;
  std::string test_path;
  std::string ratios = "1:10:0.5";
  std::string kinds = "original,quadratic";
  std::size_t dump_first = 0;
  double dump_cp = 4.0;
  bool timing = false;
  sopt.add_to(*sweep_cmd);
  sweep_cmd->add_option("--train", train_path)->required();
  sweep_cmd->add_option("--test", test_path)->required();
  sweep_cmd->add_option("--ratios", ratios, "lo:hi:step")->capture_default_str();
  sweep_cmd->add_option("--kinds", kinds)->capture_default_str();
  sweep_cmd->add_option("--dump-first", dump_first, "dump the first K training predictions")
      ->capture_default_str();
  sweep_cmd->add_option("--dump-cp", dump_cp, "shortage cost of the dumped models")->capture_default_str();
  sweep_cmd->add_flag("--timing", timing, "record wall time per cell (output no longer reproducible)");
  sweep_cmd->add_option("--demand-cols", demand_cols)->capture_default_str();
  sweep_cmd->add_option("--out", out_flag, "output directory");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score a saved model on a dataset");
  std::string model_path;
  eval_cmd->add_option("--model", model_path)->required();
  eval_cmd->add_option("--data", data_path)->required();
  eval_cmd->add_option("--demand-cols", demand_cols)->capture_default_str();
  eval_cmd->add_option("--out", out_flag, "output directory");

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  std::string manifest_path;
  replay_cmd->add_option("--manifest", manifest_path)->required();
  replay_cmd->add_option("--out", out_flag, "output directory");

  app.require_subcommand(1);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  app.parse(reversed);

  const auto recorded = strip_out(args);

  if (replay_cmd->parsed()) {
    std::ifstream in(manifest_path);
    if (!in) throw UsageError(fmt::format("cannot read manifest '{}'", manifest_path));
    const json manifest = json::parse(in);
    auto replay_args = manifest.at("args").get<std::vector<std::string>>();
    replay_args.push_back("--out");
    replay_args.push_back(resolve_out(out_flag).string());
    return run_cli(replay_args);
  }

  const fs::path out = resolve_out(out_flag);
  fs::create_directories(out);

  if (gen->parsed()) {
    if (table1->parsed()) {
      Run run("gen table1", recorded, out);
      run.set_seed(table1_seed);
      auto [train_set, test_set] = table1_dataset(table1_seed);
      const std::string note = fmt::format("table1 seed {}", table1_seed);
      save_csv(run.artifact("table1_train.csv").string(), train_set, note);
      save_csv(run.artifact("table1_test.csv").string(), test_set, note);
      run.finish();
    } else if (synthetic->parsed()) {
      Run run("gen synthetic", recorded, out);
      run.set_seed(gen_seed);
      run.config() = {{"days", synth.days}, {"lo", synth.demand_lo}, {"hi", synth.demand_hi},
                      {"start_weekday", synth.start_weekday}};
      Rng rng(gen_seed);
      const auto data = gen_synthetic(rng, synth);
      save_csv(run.artifact("synthetic.csv").string(), data, fmt::format("synthetic seed {}", gen_seed));
      run.finish();
    } else if (blocks->parsed()) {
      Run run("gen blocks", recorded, out);
      run.set_seed(gen_seed);
      const auto data = load_csv(in_path, demand_cols);
      const auto groups = group_blocks(data);
      Rng rng(gen_seed);
      const auto sampled = sample_blocks(data, groups, block_count, rng);
      run.config() = {{"count", block_count}};
      run.results() = {{"blocks_found", groups.size()}, {"rows_written", sampled.size()}};
      save_csv(run.artifact("blocks.csv").string(), sampled, fmt::format("blocks seed {}", gen_seed));
      run.finish();
    } else if (outliers->parsed()) {
      Run run("gen outliers", recorded, out);
      run.set_seed(gen_seed);
      const auto data = load_csv(in_path, demand_cols);
      Rng rng(gen_seed);
      const auto res = inject_outliers(data, threshold, factor, rng, subset);
      run.config() = {{"subset", subset}, {"threshold", threshold}, {"factor", factor}};
      run.results() = {
          {"outliers", std::count(res.mask.begin(), res.mask.end(), true)}};
      save_csv(run.artifact("outliers.csv").string(), res.data, fmt::format("outliers seed {}", gen_seed));
      write_mask_csv(run.artifact("outlier_mask.csv"), res.mask);
      run.finish();
    }
    return 0;
  }

  if (train_cmd->parsed()) {
    Run run("train", recorded, out);
    run.set_seed(mopt.seed);
    const auto data = load_csv(data_path, demand_cols);
    const auto spec = mopt.spec_for(data);
    const auto cfg = mopt.train_config();
    const CostPair cost(cp, mopt.ch);
    const LossKind kind = parse_loss_kind(loss);
    mopt.echo(run.config(), spec);
    run.config()["cp"] = cp;
    run.config()["loss"] = loss;
    const auto cell = train_any(spec.instantiate(mopt.seed), data, cost, kind, cfg);
    save_model(run.artifact("model.txt").string(), cell.model);
    write_trace_csv(run.artifact("trace.csv").string(), cell.initial_objective, cell.trace);
    const AnyModel& trained = cell.model;
    struct {
      const AnyModel& m;
      std::vector<double> predict(std::span<const double> x) const { return newsvendor::predict(m, x); }
    } predictor{trained};
    run.results() = {{"iterations", cell.iterations},
                     {"stop", std::string(to_string(cell.stop))},
                     {"initial_objective", cell.initial_objective},
                     {"final_objective", cell.final_objective},
                     {"train_err", train_err(predictor, data)}};
    run.finish();
    return 0;
  }

  if (sweep_cmd->parsed()) {
    Run run("sweep", recorded, out);
    run.set_seed(sopt.seed);
    const auto train_set = load_csv(train_path, demand_cols);
    const auto test_set = load_csv(test_path, demand_cols);
    SweepConfig cfg;
    cfg.ch = sopt.ch;
    cfg.ratios = parse_ratios(ratios);
    cfg.kinds = parse_kinds(kinds);
    cfg.model = sopt.spec_for(train_set);
    cfg.train = sopt.train_config();
    cfg.seed = sopt.seed;
    cfg.record_time = timing;
    sopt.echo(run.config(), cfg.model);
    run.config()["ratios"] = cfg.ratios;
    run.config()["kinds"] = kinds;
    const auto result = run_sweep(cfg, train_set, test_set);
    write_sweep_csv(run.artifact("sweep.csv").string(), result);
    if (dump_first > 0) {
      const AnyModel start = cfg.model.instantiate(cfg.seed);
      std::map<LossKind, AnyModel> models;
      for (LossKind kind : cfg.kinds) {
        models.emplace(kind, train_any(start, train_set, CostPair(dump_cp, cfg.ch), kind, cfg.train).model);
      }
      write_prediction_csv(run.artifact("predictions.csv").string(),
                           dump_predictions(models, train_set, dump_first));
      run.config()["dump_first"] = dump_first;
      run.config()["dump_cp"] = dump_cp;
    }
    run.finish();
    return 0;
  }

  if (eval_cmd->parsed()) {
    Run run("eval", recorded, out);
    const AnyModel model = load_model(model_path);
    const auto data = load_csv(data_path, demand_cols);
    if (input_size(model) != data.feature_count() || output_size(model) != data.product_count()) {
      throw UsageError("model and dataset shapes disagree");
    }
    std::ofstream preds(run.artifact("predictions.csv"));
    preds << "index";
    for (const auto& name : data.demand_names) preds << ',' << name << ",pred_" << name;
    preds << '\n';
    double sq = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto y = predict(model, data.features.row(i));
      preds << i;
      for (std::size_t k = 0; k < y.size(); ++k) {
        preds << ',' << format_double(data.demands(i, k)) << ',' << format_double(y[k]);
        sq += (y[k] - data.demands(i, k)) * (y[k] - data.demands(i, k));
      }
      preds << '\n';
    }
    run.results() = {{"rows", data.size()}, {"mean_squared_error", sq / static_cast<double>(data.size())}};
    run.finish();
    return 0;
  }
  return 2;
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Newsvendor ordering models trained under the newsvendor and quadratic losses"};
  app.set_version_flag("--version", kToolVersion);
  try {
    return dispatch(app, args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const TrainingError& e) {
    std::cerr << "training failed at iteration " << e.iteration() << ": " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  return run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
