#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace newsvendor {

/// Per-unit shortage cost `cp` (charged on unmet demand) and holding cost
/// `ch` (charged on leftover stock). Both strictly positive.
struct CostPair {
  double cp;
  double ch;

  CostPair(double shortage, double holding);

  /// cp / (cp + ch), the demand quantile the optimal order sits at.
  double critical_fractile() const { return cp / (cp + ch); }
};

enum class LossKind { Original, Quadratic };

std::string_view to_string(LossKind kind);
/// Accepts "original" and "quadratic"; throws std::invalid_argument otherwise.
LossKind parse_loss_kind(std::string_view text);

/// Sum over products of cp*(d-y)+ + ch*(y-d)+.
double newsvendor_cost(std::span<const double> demand, std::span<const double> order,
                       const CostPair& cost);

/// Sum over products of the squared per-product newsvendor penalty.
double quadratic_cost(std::span<const double> demand, std::span<const double> order,
                      const CostPair& cost);

/// The newsvendor cost assembled from two rectifiers, cp*ReLU(d-y) + ch*ReLU(y-d).
double cost_via_relu(std::span<const double> demand, std::span<const double> order,
                     const CostPair& cost);

double loss_value(std::span<const double> demand, std::span<const double> order,
                  const CostPair& cost, LossKind kind);

/// Gradient of the chosen loss with respect to the order vector. For the
/// original loss this is the indicator subgradient: -cp where demand exceeds
/// the order, +ch where the order exceeds demand, and 0 on an exact tie.
std::vector<double> loss_grad(std::span<const double> demand, std::span<const double> order,
                              const CostPair& cost, LossKind kind);

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace newsvendor
