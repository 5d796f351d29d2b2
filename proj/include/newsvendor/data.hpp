#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "newsvendor/core_math.hpp"

namespace newsvendor {

/// Feature rows paired with demand rows. Row i of `features` belongs to row
/// i of `demands`.
struct Dataset {
  Matrix features;
  Matrix demands;
  std::vector<std::string> feature_names;
  std::vector<std::string> demand_names;

  Dataset() = default;
  /// Validates row agreement, N >= 1 and name counts. Empty name lists are
  /// filled with x0.. and d0.. labels.
  Dataset(Matrix features, Matrix demands, std::vector<std::string> feature_names = {},
          std::vector<std::string> demand_names = {});

  std::size_t size() const { return features.rows(); }
  std::size_t feature_count() const { return features.cols(); }
  std::size_t product_count() const { return demands.cols(); }

  /// New dataset holding the listed rows in the listed order.
  Dataset select(const std::vector<std::size_t>& rows) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Reads a CSV whose header names every column and whose last
/// `demand_columns` columns are demands. Lines starting with '#' are
/// comments. Errors carry the 1-based line number.
Dataset load_csv(const std::string& path, std::size_t demand_columns = 1);

/// Writes the CSV schema read by load_csv. `comment`, when given, becomes a
/// leading '# ' line.
void save_csv(const std::string& path, const Dataset& data,
              const std::optional<std::string>& comment = std::nullopt);

/// Seeded shuffle, then the first split_train_size() rows train.
std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, std::uint64_t seed);

/// Number of training rows split() produces: N * train_fraction rounded to
/// the nearest integer, exact halves rounded down.
std::size_t split_train_size(std::size_t n, double train_fraction);

inline constexpr std::uint64_t kTable1Seed = 20170401;

/// Two weeks of training and two weeks of testing demand with binary
/// Holiday/Weather/Promotion features. Demands are the published table;
/// Weather and Promotion are regenerated from `seed`.
std::pair<Dataset, Dataset> table1_dataset(std::uint64_t seed = kTable1Seed);

struct SyntheticOptions {
  std::size_t days = 14;
  std::int64_t demand_lo = 3;
  std::int64_t demand_hi = 20;
  /// 0 = Monday ... 6 = Sunday for the first generated row.
  int start_weekday = 0;
};

/// Uniform integer demands, fair-coin Weather and Promotion, Holiday = 1 on
/// weekends. Columns are Holiday, Weather, Promotion, demand.
Dataset gen_synthetic(Rng& rng, const SyntheticOptions& options = {});

/// Rows sharing one exact feature vector.
struct Block {
  std::vector<double> feature_key;
  std::vector<std::size_t> row_indices;
};

/// Partition rows by feature vector, blocks in order of first occurrence.
std::vector<Block> group_blocks(const Dataset& data);

/// Rows of `count` blocks drawn without replacement, concatenated in draw
/// order.
Dataset sample_blocks(const Dataset& data, const std::vector<Block>& blocks, std::size_t count,
                      Rng& rng);

struct OutlierResult {
  Dataset data;
  /// True where a demand was multiplied.
  std::vector<bool> mask;
};

/// Draws `subset` rows without replacement and multiplies every demand above
/// `threshold` in them by `factor`. The returned dataset keeps all rows in
/// their original order.
OutlierResult inject_outliers(const Dataset& data, double threshold, double factor, Rng& rng,
                              std::size_t subset);

}  // namespace newsvendor
