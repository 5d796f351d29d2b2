#include "newsvendor/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "newsvendor/format.hpp"

namespace newsvendor {

Dataset::Dataset(Matrix features_, Matrix demands_, std::vector<std::string> feature_names_,
                 std::vector<std::string> demand_names_)
    : features(std::move(features_)),
      demands(std::move(demands_)),
      feature_names(std::move(feature_names_)),
      demand_names(std::move(demand_names_)) {
  if (features.rows() != demands.rows()) {
    throw std::invalid_argument(fmt::format("Dataset: {} feature rows but {} demand rows",
                                            features.rows(), demands.rows()));
  }
  if (features.rows() == 0) throw std::invalid_argument("Dataset: no rows");
  if (demands.cols() == 0) throw std::invalid_argument("Dataset: no demand columns");
  if (feature_names.empty()) {
    for (std::size_t j = 0; j < features.cols(); ++j) feature_names.push_back(fmt::format("x{}", j));
  }
  if (demand_names.empty()) {
    for (std::size_t k = 0; k < demands.cols(); ++k) demand_names.push_back(fmt::format("d{}", k));
  }
  if (feature_names.size() != features.cols() || demand_names.size() != demands.cols()) {
    throw std::invalid_argument("Dataset: column name count does not match the data");
  }
}

Dataset Dataset::select(const std::vector<std::size_t>& rows) const {
  Matrix x(rows.size(), feature_count());
  Matrix d(rows.size(), product_count());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= size()) throw std::out_of_range(fmt::format("Dataset::select: row {}", rows[i]));
    std::ranges::copy(features.row(rows[i]), x.row(i).begin());
    std::ranges::copy(demands.row(rows[i]), d.row(i).begin());
  }
  return Dataset(std::move(x), std::move(d), feature_names, demand_names);
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ls(line);
  while (std::getline(ls, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

Dataset load_csv(const std::string& path, std::size_t demand_columns) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path));
  if (demand_columns == 0) throw std::invalid_argument("load_csv: need at least one demand column");

  std::vector<std::string> header;
  std::vector<double> xs;
  std::vector<double> ds;
  std::size_t rows = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    auto fields = split_fields(line);
    if (header.empty()) {
      for (auto& f : fields) header.push_back(trim(f));
      if (header.size() < demand_columns) {
        throw std::runtime_error(fmt::format("{}:{}: header has {} columns, need at least {}",
                                             path, line_no, header.size(), demand_columns));
      }
      continue;
    }
    if (fields.size() != header.size()) {
      throw std::runtime_error(fmt::format("{}:{}: row has {} fields, header has {}", path, line_no,
                                           fields.size(), header.size()));
    }
    const std::size_t n_features = header.size() - demand_columns;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      double v;
      try {
        v = parse_double(fields[j]);
      } catch (const std::invalid_argument&) {
        throw std::runtime_error(fmt::format("{}:{}: column '{}' is not numeric: '{}'", path,
                                             line_no, header[j], fields[j]));
      }
      if (!std::isfinite(v)) {
        throw std::runtime_error(
            fmt::format("{}:{}: column '{}' is not finite", path, line_no, header[j]));
      }
      (j < n_features ? xs : ds).push_back(v);
    }
    ++rows;
  }
  if (header.empty()) throw std::runtime_error(fmt::format("{}: empty file", path));
  if (rows == 0) throw std::runtime_error(fmt::format("{}: header but no data rows", path));

  const std::size_t n_features = header.size() - demand_columns;
  std::vector<std::string> fnames(header.begin(), header.begin() + static_cast<long>(n_features));
  std::vector<std::string> dnames(header.begin() + static_cast<long>(n_features), header.end());
  return Dataset(Matrix(rows, n_features, std::move(xs)), Matrix(rows, demand_columns, std::move(ds)),
                 std::move(fnames), std::move(dnames));
}

void save_csv(const std::string& path, const Dataset& data, const std::optional<std::string>& comment) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  if (comment) out << "# " << *comment << '\n';
  std::vector<std::string> names = data.feature_names;
  names.insert(names.end(), data.demand_names.begin(), data.demand_names.end());
  out << fmt::format("{}\n", fmt::join(names, ","));
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::string line;
    for (double v : data.features.row(i)) line += format_double(v) + ',';
    for (double v : data.demands.row(i)) line += format_double(v) + ',';
    line.back() = '\n';
    out << line;
  }
}

std::size_t split_train_size(std::size_t n, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument(fmt::format("split: fraction {} outside (0, 1)", train_fraction));
  }
  // nearest integer, exact halves go to the test side (13170 * 0.75 -> 9877)
  return static_cast<std::size_t>(std::ceil(static_cast<double>(n) * train_fraction - 0.5));
}

std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, std::uint64_t seed) {
  const std::size_t n_train = split_train_size(data.size(), train_fraction);
  if (n_train == 0 || n_train == data.size()) {
    throw std::invalid_argument(fmt::format(
        "split: fraction {} of {} rows leaves one side empty", train_fraction, data.size()));
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<long>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<long>(n_train), order.end());
  return {data.select(train), data.select(test)};
}

namespace {

const std::vector<std::string> kSyntheticFeatures{"Holiday", "Weather", "Promotion"};

// Week-major, Monday first.
constexpr double kTable1Train[14] = {13, 7, 16, 7, 12, 15, 19, 20, 12, 5, 5, 7, 18, 7};
constexpr double kTable1Test[14] = {7, 10, 6, 5, 18, 12, 18, 17, 19, 7, 5, 13, 5, 14};

bool is_weekend(std::size_t day, int start_weekday) {
  return (static_cast<std::size_t>(start_weekday) + day) % 7 >= 5;
}

Dataset table1_part(const double (&demand)[14], Rng& rng) {
  Matrix x(14, 3);
  Matrix d(14, 1);
  for (std::size_t i = 0; i < 14; ++i) {
    x(i, 0) = is_weekend(i, 0) ? 1.0 : 0.0;
    x(i, 1) = rng.coin() ? 1.0 : 0.0;
    x(i, 2) = rng.coin() ? 1.0 : 0.0;
    d(i, 0) = demand[i];
  }
  return Dataset(std::move(x), std::move(d), kSyntheticFeatures, {"demand"});
}

}  // namespace

std::pair<Dataset, Dataset> table1_dataset(std::uint64_t seed) {
  Rng rng(seed);
  auto train = table1_part(kTable1Train, rng);
  auto test = table1_part(kTable1Test, rng);
  return {std::move(train), std::move(test)};
}

Dataset gen_synthetic(Rng& rng, const SyntheticOptions& options) {
  if (options.days == 0) throw std::invalid_argument("gen_synthetic: days must be at least 1");
  if (options.demand_lo > options.demand_hi) {
    throw std::invalid_argument(fmt::format("gen_synthetic: demand range [{}, {}] is empty",
                                            options.demand_lo, options.demand_hi));
  }
  if (options.start_weekday < 0 || options.start_weekday > 6) {
    throw std::invalid_argument("gen_synthetic: start_weekday must be in 0..6");
  }
  Matrix x(options.days, 3);
  Matrix d(options.days, 1);
  for (std::size_t i = 0; i < options.days; ++i) {
    x(i, 0) = is_weekend(i, options.start_weekday) ? 1.0 : 0.0;
    x(i, 1) = rng.coin() ? 1.0 : 0.0;
    x(i, 2) = rng.coin() ? 1.0 : 0.0;
    d(i, 0) = static_cast<double>(rng.uniform_int(options.demand_lo, options.demand_hi));
  }
  return Dataset(std::move(x), std::move(d), kSyntheticFeatures, {"demand"});
}

std::vector<Block> group_blocks(const Dataset& data) {
  std::vector<Block> blocks;
  std::map<std::vector<double>, std::size_t> index;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto row = data.features.row(i);
    std::vector<double> key(row.begin(), row.end());
    auto [it, inserted] = index.try_emplace(key, blocks.size());
    if (inserted) blocks.push_back(Block{std::move(key), {}});
    blocks[it->second].row_indices.push_back(i);
  }
  return blocks;
}

Dataset sample_blocks(const Dataset& data, const std::vector<Block>& blocks, std::size_t count,
                      Rng& rng) {
  if (count > blocks.size()) {
    throw std::invalid_argument(
        fmt::format("sample_blocks: asked for {} blocks but only {} exist", count, blocks.size()));
  }
  if (count == 0) throw std::invalid_argument("sample_blocks: count must be at least 1");
  std::vector<std::size_t> order(blocks.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::size_t> rows;
  for (std::size_t b = 0; b < count; ++b) {
    const auto& picked = blocks[order[b]].row_indices;
    rows.insert(rows.end(), picked.begin(), picked.end());
  }
  return data.select(rows);
}

OutlierResult inject_outliers(const Dataset& data, double threshold, double factor, Rng& rng,
                              std::size_t subset) {
  if (!(threshold > 0.0) || !(factor > 0.0)) {
    throw std::invalid_argument("inject_outliers: threshold and factor must be positive");
  }
  if (subset > data.size()) {
    throw std::invalid_argument(
        fmt::format("inject_outliers: subset {} exceeds {} rows", subset, data.size()));
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  OutlierResult result{data, std::vector<bool>(data.size(), false)};
  for (std::size_t s = 0; s < subset; ++s) {
    const std::size_t i = order[s];
    for (double& v : result.data.demands.row(i)) {
      if (v > threshold) {
        v *= factor;
        result.mask[i] = true;
      }
    }
  }
  return result;
}

}  // namespace newsvendor
