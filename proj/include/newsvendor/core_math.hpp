#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace newsvendor {

/// Dense row-major matrix of finite doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Takes ownership of `data`; throws if its length is not rows * cols or an
  /// entry is not finite.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::vector<double> mat_vec(const Matrix& m, std::span<const double> v);

/// Throws std::invalid_argument naming `what` when a and b differ in length.
void require_same_length(std::span<const double> a, std::span<const double> b, const char* what);

/// Seeded xoshiro256** generator, state expanded from the seed with
/// splitmix64. Identical seeds give identical streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi);
  /// Uniform integer in the closed range [lo, hi], unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  bool coin() { return (next_u64() >> 63) != 0; }
  double normal();

  /// Fisher-Yates shuffle of `items`.
  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i - 1)));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

double std_normal_cdf(double z);

/// z with std_normal_cdf(z) == p, found by bisection. Requires 0 < p < 1.
double std_normal_inv_cdf(double p);

}  // namespace newsvendor
