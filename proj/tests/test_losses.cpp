#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "newsvendor/core_math.hpp"
#include "newsvendor/losses.hpp"

using namespace newsvendor;

namespace {

using Vec = std::vector<double>;
const CostPair kCost(2.0, 1.5);

}  // namespace

TEST_CASE("CostPair validates") {
  CHECK_THROWS_AS(CostPair(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(CostPair(1.0, -1.0), std::invalid_argument);
  CHECK(CostPair(3.0, 1.0).critical_fractile() == 0.75);
}

TEST_CASE("loss kinds parse and print") {
  CHECK(parse_loss_kind("original") == LossKind::Original);
  CHECK(parse_loss_kind("quadratic") == LossKind::Quadratic);
  CHECK(to_string(LossKind::Quadratic) == "quadratic");
  CHECK_THROWS_AS(parse_loss_kind("bogus"), std::invalid_argument);
}

TEST_CASE("newsvendor_cost") {
  CHECK(newsvendor_cost(Vec{10}, Vec{10}, kCost) == 0.0);
  CHECK(newsvendor_cost(Vec{10}, Vec{7}, kCost) == 6.0);
  CHECK(newsvendor_cost(Vec{10, 5}, Vec{7, 6}, kCost) == 7.5);
  CHECK_THROWS_AS(newsvendor_cost(Vec{1, 2}, Vec{1}, kCost), std::invalid_argument);
}

TEST_CASE("quadratic_cost") {
  CHECK(quadratic_cost(Vec{10}, Vec{10}, CostPair(9.0, 0.1)) == 0.0);
  CHECK(quadratic_cost(Vec{10}, Vec{7}, kCost) == 36.0);
  CHECK(quadratic_cost(Vec{10, 5}, Vec{7, 6}, kCost) == 38.25);
  CHECK_THROWS_AS(quadratic_cost(Vec{1}, Vec{}, kCost), std::invalid_argument);
}

TEST_CASE("loss_grad") {
  CHECK(loss_grad(Vec{10}, Vec{7}, kCost, LossKind::Original) == Vec{-2.0});
  CHECK(loss_grad(Vec{10}, Vec{12}, kCost, LossKind::Original) == Vec{1.5});
  CHECK(loss_grad(Vec{10}, Vec{10}, kCost, LossKind::Original) == Vec{0.0});
  // central difference of quadratic_cost at h = 1e-5 gives -23.99999999909
  CHECK(loss_grad(Vec{10}, Vec{7}, kCost, LossKind::Quadratic)[0] == doctest::Approx(-24.0).epsilon(1e-12));
  CHECK(loss_grad(Vec{10}, Vec{10}, kCost, LossKind::Quadratic) == Vec{0.0});
  CHECK_THROWS_AS(loss_grad(Vec{1}, Vec{1, 2}, kCost, LossKind::Original), std::invalid_argument);
}

TEST_CASE("cost_via_relu") {
  CHECK(cost_via_relu(Vec{10}, Vec{7}, kCost) == 6.0);
  CHECK(cost_via_relu(Vec{5}, Vec{9}, kCost) == 6.0);
  CHECK_THROWS_AS(cost_via_relu(Vec{1}, Vec{1, 1}, kCost), std::invalid_argument);

  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto m = static_cast<std::size_t>(rng.uniform_int(1, 5));
    Vec d(m), y(m);
    for (std::size_t k = 0; k < m; ++k) {
      d[k] = rng.uniform(0, 100);
      y[k] = rng.uniform(0, 100);
    }
    const CostPair c(rng.uniform(0.1, 10), rng.uniform(0.1, 10));
    CHECK(std::abs(cost_via_relu(d, y, c) - newsvendor_cost(d, y, c)) <= 1e-12);
  }
}

TEST_CASE("original loss subgradient inequality holds") {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const auto m = static_cast<std::size_t>(rng.uniform_int(1, 4));
    Vec d(m), y(m), y2(m);
    for (std::size_t k = 0; k < m; ++k) {
      d[k] = rng.uniform(0, 50);
      y[k] = rng.uniform(0, 50);
      y2[k] = rng.uniform(0, 50);
    }
    const CostPair c(rng.uniform(0.1, 10), rng.uniform(0.1, 10));
    const auto g = loss_grad(d, y, c, LossKind::Original);
    double lin = newsvendor_cost(d, y, c);
    for (std::size_t k = 0; k < m; ++k) lin += g[k] * (y2[k] - y[k]);
    CHECK(newsvendor_cost(d, y2, c) >= lin - 1e-9);
  }
}

TEST_CASE("analytic gradients agree with central differences away from kinks") {
  Rng rng(5);
  const double h = 1e-5;
  int checked = 0;
  while (checked < 300) {
    const auto m = static_cast<std::size_t>(rng.uniform_int(1, 4));
    Vec d(m), y(m);
    bool near_kink = false;
    for (std::size_t k = 0; k < m; ++k) {
      d[k] = rng.uniform(0, 30);
      y[k] = rng.uniform(0, 30);
      near_kink |= std::abs(d[k] - y[k]) <= 1e-3;
    }
    if (near_kink) continue;
    ++checked;
    const CostPair c(rng.uniform(0.5, 5), rng.uniform(0.5, 5));
    for (LossKind kind : {LossKind::Original, LossKind::Quadratic}) {
      const auto g = loss_grad(d, y, c, kind);
      for (std::size_t k = 0; k < m; ++k) {
        Vec up = y, down = y;
        up[k] += h;
        down[k] -= h;
        const double fd = (loss_value(d, up, c, kind) - loss_value(d, down, c, kind)) / (2 * h);
        CHECK(std::abs(fd - g[k]) <= 1e-5 * std::max(1.0, std::abs(g[k])));
      }
    }
  }
}

TEST_CASE("losses are positively homogeneous") {
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    Vec d{rng.uniform(0, 40), rng.uniform(0, 40)};
    Vec y{rng.uniform(0, 40), rng.uniform(0, 40)};
    const double t = rng.uniform(0.1, 10);
    Vec td{t * d[0], t * d[1]}, ty{t * y[0], t * y[1]};
    CHECK(newsvendor_cost(td, ty, kCost) == doctest::Approx(t * newsvendor_cost(d, y, kCost)).epsilon(1e-12));
    CHECK(quadratic_cost(td, ty, kCost) == doctest::Approx(t * t * quadratic_cost(d, y, kCost)).epsilon(1e-12));
  }
}
