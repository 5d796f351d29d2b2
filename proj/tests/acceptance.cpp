// Acceptance suite: one PASS/FAIL line per criterion with its runtime and
// budget. Exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "gradcheck.hpp"
#include "newsvendor/core_math.hpp"
#include "newsvendor/data.hpp"
#include "newsvendor/experiments.hpp"
#include "newsvendor/losses.hpp"
#include "newsvendor/models.hpp"
#include "newsvendor/optim.hpp"

using namespace newsvendor;
namespace fs = std::filesystem;
using Vec = std::vector<double>;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

// 1. Analytic MLP gradients against central differences.
Outcome gradient_correctness() {
  constexpr double kTolerance = 1e-5;
  Rng rng(2024);
  int pairs = 0;
  double worst = 0.0;
  while (pairs < 100) {
    std::vector<std::size_t> sizes{static_cast<std::size_t>(rng.uniform_int(1, 5))};
    const auto hidden = rng.uniform_int(1, 3);
    for (int h = 0; h < hidden; ++h) sizes.push_back(static_cast<std::size_t>(rng.uniform_int(1, 8)));
    sizes.push_back(static_cast<std::size_t>(rng.uniform_int(1, 3)));
    const MlpModel net = testing::random_mlp(sizes, rng);
    Vec x(sizes.front());
    for (double& v : x) v = rng.uniform(-2, 2);
    Vec d(sizes.back());
    for (double& v : d) v = rng.uniform(0, 30);
    const auto y = mlp_forward(net, x);
    bool near_kink = false;
    for (std::size_t k = 0; k < d.size(); ++k) near_kink |= std::abs(y[k] - d[k]) <= 1e-3;
    if (near_kink) continue;
    ++pairs;
    const CostPair cost(rng.uniform(0.5, 15), rng.uniform(0.5, 5));
    for (LossKind kind : {LossKind::Original, LossKind::Quadratic}) {
      const auto g = mlp_backward(net, x, d, cost, kind).flatten();
      const auto fd = testing::central_difference_gradient(net, x, d, cost, kind);
      for (std::size_t k = 0; k < g.size(); ++k) worst = std::max(worst, testing::relative_error(g[k], fd[k]));
    }
  }
  return {worst < kTolerance, fmt::format("100 pairs x 2 losses, worst relative error {:.3e} (< {:.0e})", worst, kTolerance)};
}

// 2. Two-ReLU form equals the newsvendor cost.
Outcome decomposition_identity() {
  Rng rng(7);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto m = static_cast<std::size_t>(rng.uniform_int(1, 6));
    Vec d(m), y(m);
    for (std::size_t k = 0; k < m; ++k) {
      d[k] = rng.uniform(0, 500);
      y[k] = rng.uniform(0, 500);
    }
    const CostPair c(rng.uniform(0.01, 20), rng.uniform(0.01, 20));
    worst = std::max(worst, std::abs(cost_via_relu(d, y, c) - newsvendor_cost(d, y, c)));
  }
  return {worst <= 1e-12, fmt::format("1000 instances, max |difference| {:.3e} (<= 1e-12)", worst)};
}

// 3. Closed-form normal order against brute-force Monte-Carlo minimization.
Outcome classical_consistency() {
  const double mu = 100, sigma = 10;
  const CostPair cost(3, 1);
  Rng rng(99);
  Vec samples(100000);
  for (double& s : samples) s = mu + sigma * rng.normal();
  std::sort(samples.begin(), samples.end());
  Vec prefix(samples.size() + 1, 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) prefix[i + 1] = prefix[i] + samples[i];
  const double n = static_cast<double>(samples.size());
  // mean cost at y: cp * sum(d - y)+ + ch * sum(y - d)+ over n
  auto mc_cost = [&](double y) {
    const auto below = static_cast<std::size_t>(std::upper_bound(samples.begin(), samples.end(), y) - samples.begin());
    const double under = prefix[below];
    const double over = prefix.back() - under;
    const double nb = static_cast<double>(below);
    return (cost.cp * (over - (n - nb) * y) + cost.ch * (nb * y - under)) / n;
  };
  double best_y = 0.0, best = INFINITY;
  for (long k = 0; k <= 8000; ++k) {
    const double y = mu - 4 * sigma + 0.01 * static_cast<double>(k);
    const double c = mc_cost(y);
    if (c < best) {
      best = c;
      best_y = y;
    }
  }
  const double closed = classical_normal_order(mu, sigma, cost);
  const double rel = std::abs(closed - best_y) / std::abs(best_y);
  return {rel <= 0.01, fmt::format("closed form {:.4f}, Monte-Carlo grid {:.2f}, relative gap {:.2e} (<= 1%)", closed, best_y, rel)};
}

// 4. A linear model on constant features learns the empirical quantile.
Outcome quantile_recovery() {
  Rng rng(404);
  Vec demands(200);
  for (double& d : demands) d = static_cast<double>(rng.uniform_int(3, 20));
  const Dataset data(Matrix(200, 1, 1.0), Matrix(200, 1, demands));
  bool ok = true;
  std::string detail;
  const double ch = 1.5;
  for (double ratio : {1.0, 1.5, 3.0, 9.0}) {
    const CostPair cost(ratio * ch, ch);
    const auto report = train(LinearModel(1), data, cost, LossKind::Original, TrainConfig{});
    const double pred = linear_forward(report.model, Vec{1.0});
    const double target = empirical_quantile_order(demands, cost);
    const bool cell = std::abs(pred - target) <= 1.0;
    ok &= cell;
    detail += fmt::format("{}fractile {:.2f}: learned {:.3f} vs quantile {:.0f}", detail.empty() ? "" : "; ",
                          cost.critical_fractile(), pred, target);
  }
  return {ok, detail + " (tolerance +-1)"};
}

// 5. Outlier robustness of the newsvendor loss against the quadratic loss.
Outcome robustness_ordering() {
  constexpr int kSeeds = 10;
  constexpr int kRequiredWins = 8;
  constexpr std::size_t kOutlierSubset = 200;
  const CostPair cost(4.0, 1.5);
  int wins = 0;
  std::string per_seed;
  for (int s = 0; s < kSeeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(1000 + s);
    Rng gen(seed);
    const auto clean = gen_synthetic(gen, {.days = 1000, .demand_lo = 3, .demand_hi = 200});
    auto injected = inject_outliers(clean, 60, 10, gen, kOutlierSubset);
    // carry the mask through the split as an extra demand column
    Matrix tagged(injected.data.size(), 2);
    for (std::size_t i = 0; i < injected.data.size(); ++i) {
      tagged(i, 0) = injected.data.demands(i, 0);
      tagged(i, 1) = injected.mask[i] ? 1.0 : 0.0;
    }
    const Dataset with_mask(injected.data.features, tagged);
    auto [train_tagged, test_tagged] = split(with_mask, 0.75, seed);
    auto strip = [](const Dataset& d) {
      Matrix dem(d.size(), 1);
      for (std::size_t i = 0; i < d.size(); ++i) dem(i, 0) = d.demands(i, 0);
      return Dataset(d.features, dem, d.feature_names, {"demand"});
    };
    const Dataset train_set = strip(train_tagged);
    const Dataset test_set = strip(test_tagged);
    std::vector<bool> test_mask(test_set.size());
    Vec test_demand(test_set.size());
    for (std::size_t i = 0; i < test_set.size(); ++i) {
      test_mask[i] = test_tagged.demands(i, 1) == 1.0;
      test_demand[i] = test_set.demands(i, 0);
    }

    Rng init(seed);
    const auto start = MlpModel::initialized({3, 10, 10, 1}, 1.0 / 66.0, init);
    TrainConfig cfg;
    cfg.max_iters = 500;
    std::map<LossKind, Vec> predictions;
    for (LossKind kind : {LossKind::Original, LossKind::Quadratic}) {
      const auto report = train(start, train_set, cost, kind, cfg);
      Vec pred(test_set.size());
      for (std::size_t i = 0; i < test_set.size(); ++i) pred[i] = mlp_forward(report.model, test_set.features.row(i))[0];
      predictions[kind] = std::move(pred);
    }
    const auto summary = robustness_report(test_mask, predictions, test_demand);
    const double l1 = summary.per_kind.at(LossKind::Original).clean_median_abs_error;
    const double l2 = summary.per_kind.at(LossKind::Quadratic).clean_median_abs_error;
    wins += l1 <= l2 ? 1 : 0;
    per_seed += fmt::format(" {:.1f}/{:.1f}", l1, l2);
  }
  return {wins >= kRequiredWins,
          fmt::format("original <= quadratic clean-row median |error| in {}/{} seeds (need {}); per seed:{}",
                      wins, kSeeds, kRequiredWins, per_seed)};
}

// 6. Sweep grid and train/test split sizes.
Outcome protocol_fidelity() {
  const SweepConfig cfg;
  bool ok = cfg.ratios.size() == 19 && cfg.ch == 1.5;
  for (std::size_t i = 0; i < cfg.ratios.size(); ++i) ok &= cfg.ratios[i] == 1.0 + 0.5 * static_cast<double>(i);
  ok &= cfg.ch * cfg.ratios.front() == 1.5 && cfg.ch * cfg.ratios.back() == 15.0;
  ok &= cfg.kinds.size() == 2;
  const Dataset big(Matrix(13170, 1), Matrix(13170, 1));
  auto [train_set, test_set] = split(big, 0.75, 1);
  ok &= train_set.size() == 9877 && test_set.size() == 3293;
  return {ok, fmt::format("{} ratios {}..{}, cp {}..{}, split(13170, 0.75) = ({}, {})", cfg.ratios.size(),
                          cfg.ratios.front(), cfg.ratios.back(), cfg.ch * cfg.ratios.front(),
                          cfg.ch * cfg.ratios.back(), train_set.size(), test_set.size())};
}

// 7. The embedded two-week sample table.
Outcome table1_fidelity() {
  const Vec train_demand{13, 7, 16, 7, 12, 15, 19, 20, 12, 5, 5, 7, 18, 7};
  const Vec test_demand{7, 10, 6, 5, 18, 12, 18, 17, 19, 7, 5, 13, 5, 14};
  auto [train_set, test_set] = table1_dataset();
  bool ok = train_set.size() == 14 && test_set.size() == 14;
  int matched = 0;
  for (std::size_t i = 0; ok && i < 14; ++i) {
    matched += (train_set.demands(i, 0) == train_demand[i]) + (test_set.demands(i, 0) == test_demand[i]);
    const double weekend = i % 7 >= 5 ? 1.0 : 0.0;
    ok &= train_set.features(i, 0) == weekend && test_set.features(i, 0) == weekend;
  }
  ok &= matched == 28;
  return {ok, fmt::format("{}/28 demands verbatim, Holiday = 1 exactly on Sat/Sun", matched)};
}

// 8. CLI commands and manifest replays are byte-identical.
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& command) {
  return std::system((command + " > /dev/null 2>&1").c_str());
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  std::vector<std::string> names_a, names_b;
  for (const auto& e : fs::directory_iterator(a)) names_a.push_back(e.path().filename().string());
  for (const auto& e : fs::directory_iterator(b)) names_b.push_back(e.path().filename().string());
  std::sort(names_a.begin(), names_a.end());
  std::sort(names_b.begin(), names_b.end());
  if (names_a != names_b || names_a.empty()) {
    why = fmt::format("{} and {} hold different files", a.string(), b.string());
    return false;
  }
  for (const auto& name : names_a) {
    if (slurp(a / name) != slurp(b / name)) {
      why = fmt::format("{} differs between {} and {}", name, a.string(), b.string());
      return false;
    }
  }
  return true;
}

Outcome cli_determinism() {
  const fs::path work = fs::temp_directory_path() / "newsvendor_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);
  const std::string cli = NEWSVENDOR_CLI_PATH;
  const std::string w = work.string();
  const std::vector<std::pair<std::string, std::string>> commands{
      {"table1", "gen table1"},
      {"synthetic", "gen synthetic --days 400 --lo 3 --hi 200 --seed 5"},
      {"outliers", fmt::format("gen outliers --in {}/synthetic_a/synthetic.csv --subset 100 --seed 6", w)},
      {"blocks", fmt::format("gen blocks --in {}/synthetic_a/synthetic.csv --count 4 --seed 7", w)},
      {"train", fmt::format("train --data {}/table1_a/table1_train.csv --model mlp:3,10,10,1 --loss original "
                            "--ch 1.5 --cp 6 --seed 1",
                            w)},
      {"sweep", fmt::format("sweep --train {0}/table1_a/table1_train.csv --test {0}/table1_a/table1_test.csv "
                            "--model mlp:3,6,6,1 --ratios 1:3:1 --max-iters 40 --dump-first 14",
                            w)},
      {"eval", fmt::format("eval --model {0}/train_a/model.txt --data {0}/table1_a/table1_test.csv", w)},
  };
  int checked = 0;
  for (const auto& [tag, args] : commands) {
    const auto a = work / (tag + "_a");
    const auto b = work / (tag + "_b");
    const auto r = work / (tag + "_replay");
    if (run(fmt::format("{} {} --out {}", cli, args, a.string())) != 0 ||
        run(fmt::format("{} {} --out {}", cli, args, b.string())) != 0 ||
        run(fmt::format("{} replay --manifest {}/manifest.json --out {}", cli, a.string(), r.string())) != 0) {
      return {false, fmt::format("command '{}' exited nonzero", args)};
    }
    std::string why;
    if (!same_tree(a, b, why) || !same_tree(a, r, why)) return {false, why};
    ++checked;
  }
  return {true, fmt::format("{} commands: repeat run and manifest replay byte-identical", checked)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", 30, gradient_correctness},
      {2, "two-ReLU decomposition identity", 1, decomposition_identity},
      {3, "classical normal order consistency", 30, classical_consistency},
      {4, "quantile recovery", 120, quantile_recovery},
      {5, "robustness ordering", 900, robustness_ordering},
      {6, "protocol fidelity", 1, protocol_fidelity},
      {7, "two-week sample table", 1, table1_fidelity},
      {8, "CLI determinism", 600, cli_determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, fmt::format("threw: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = secs <= c.budget_seconds;
    const bool pass = outcome.pass && in_budget;
    failed += pass ? 0 : 1;
    std::cout << fmt::format("[{}] {}. {} ({:.2f}s, budget {}s){}: {}\n", pass ? "PASS" : "FAIL", c.id, c.name,
                             secs, c.budget_seconds, in_budget ? "" : " OVER BUDGET", outcome.detail);
  }
  std::cout << fmt::format("{}/{} criteria passed\n", criteria.size() - static_cast<std::size_t>(failed),
                           criteria.size());
  return failed == 0 ? 0 : 1;
}
