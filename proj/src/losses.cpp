#include "newsvendor/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "newsvendor/core_math.hpp"

namespace newsvendor {

CostPair::CostPair(double shortage, double holding) : cp(shortage), ch(holding) {
  if (!(cp > 0.0) || !(ch > 0.0) || !std::isfinite(cp) || !std::isfinite(ch)) {
    throw std::invalid_argument(
        fmt::format("CostPair: costs must be positive and finite (cp={}, ch={})", cp, ch));
  }
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Original:
      return "original";
    case LossKind::Quadratic:
      return "quadratic";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view text) {
  if (text == "original") return LossKind::Original;
  if (text == "quadratic") return LossKind::Quadratic;
  throw std::invalid_argument(fmt::format("unknown loss kind '{}'", text));
}

namespace {

double penalty(double d, double y, const CostPair& c) {
  return d > y ? c.cp * (d - y) : c.ch * (y - d);
}

}  // namespace

double newsvendor_cost(std::span<const double> demand, std::span<const double> order,
                       const CostPair& cost) {
  require_same_length(demand, order, "newsvendor_cost");
  double total = 0.0;
  for (std::size_t k = 0; k < demand.size(); ++k) total += penalty(demand[k], order[k], cost);
  return total;
}

double quadratic_cost(std::span<const double> demand, std::span<const double> order,
                      const CostPair& cost) {
  require_same_length(demand, order, "quadratic_cost");
  double total = 0.0;
  for (std::size_t k = 0; k < demand.size(); ++k) {
    const double p = penalty(demand[k], order[k], cost);
    total += p * p;
  }
  return total;
}

double cost_via_relu(std::span<const double> demand, std::span<const double> order,
                     const CostPair& cost) {
  require_same_length(demand, order, "cost_via_relu");
  double total = 0.0;
  for (std::size_t k = 0; k < demand.size(); ++k) {
    total += cost.cp * relu(demand[k] - order[k]) + cost.ch * relu(order[k] - demand[k]);
  }
  return total;
}

double loss_value(std::span<const double> demand, std::span<const double> order,
                  const CostPair& cost, LossKind kind) {
  return kind == LossKind::Original ? newsvendor_cost(demand, order, cost)
                                    : quadratic_cost(demand, order, cost);
}

std::vector<double> loss_grad(std::span<const double> demand, std::span<const double> order,
                              const CostPair& cost, LossKind kind) {
  require_same_length(demand, order, "loss_grad");
  std::vector<double> grad(demand.size(), 0.0);
  for (std::size_t k = 0; k < demand.size(); ++k) {
    const double gap = demand[k] - order[k];
    if (gap > 0.0) {
      grad[k] = kind == LossKind::Original ? -cost.cp : -2.0 * cost.cp * cost.cp * gap;
    } else if (gap < 0.0) {
      grad[k] = kind == LossKind::Original ? cost.ch : -2.0 * cost.ch * cost.ch * gap;
    }
  }
  return grad;
}

}  // namespace newsvendor
