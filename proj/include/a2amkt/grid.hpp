#pragma once

#include <vector>

#include "a2amkt/market.hpp"

namespace a2amkt {

// Uniform discretization of the budget half-line, truncated at b_max.
// Grid point i represents budget i*delta and owns the cell
// [max(0, (i-1/2)*delta), (i+1/2)*delta) intersected with [0, b_max].
struct GridSpec {
  double b_max = 100.0;
  double delta = 0.05;

  int n() const;
  double budget(int i) const { return i * delta; }
  double cell_lo(int i) const;
  double cell_hi(int i) const;
  double cell_width(int i) const { return cell_hi(i) - cell_lo(i); }

  // Linear-interpolation coordinates of a (clamped) budget.
  struct Lookup {
    int idx;      // in [0, n-2], or n-1 with frac == 0
    double frac;  // in [0, 1)
  };
  Lookup locate(double b) const;

  void validate() const;

  bool operator==(const GridSpec&) const = default;
};

// Throws when the grid cannot represent the market: regeneration support
// plus one trade's worth of drift must fit below b_max.
void validate_grid_for(const GridSpec& grid, const MarketParams& params);

// Value function on a grid; off-grid budgets are evaluated by linear
// interpolation and budgets above b_max clamp to the last point.
struct ValueFunction {
  GridSpec grid;
  std::vector<double> values;

  double at(double b) const {
    const auto lk = grid.locate(b);
    if (lk.frac == 0.0) return values[lk.idx];
    return (1.0 - lk.frac) * values[lk.idx] + lk.frac * values[lk.idx + 1];
  }
  double sup_norm() const;
  bool all_finite() const;
};

// Sup-norm distance evaluated on the coarser grid's points.
double sup_distance(const ValueFunction& a, const ValueFunction& b);

// Regeneration mass per grid cell; sums to 1.
std::vector<double> discretize(const RegenerationDistribution& psi, const GridSpec& grid);

}  // namespace a2amkt
