#include "a2amkt/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace a2amkt {

int GridSpec::n() const {
  return static_cast<int>(std::floor(b_max / delta + 1e-9)) + 1;
}

double GridSpec::cell_lo(int i) const {
  return std::max(0.0, (i - 0.5) * delta);
}

double GridSpec::cell_hi(int i) const {
  return std::min(b_max, (i + 0.5) * delta);
}

GridSpec::Lookup GridSpec::locate(double b) const {
  if (b <= 0.0) return {0, 0.0};
  if (b >= b_max) return {n() - 1, 0.0};
  double pos = b / delta;
  int idx = static_cast<int>(pos);
  double frac = pos - idx;
  if (idx >= n() - 1) return {n() - 1, 0.0};
  return {idx, frac};
}

void GridSpec::validate() const {
  if (!(delta > 0.0)) throw std::invalid_argument("grid.delta: must be > 0");
  if (!(b_max > 0.0) || !std::isfinite(b_max))
    throw std::invalid_argument("grid.b_max: must be positive and finite");
  if (n() < 2) throw std::invalid_argument("grid: needs at least two points");
}

void validate_grid_for(const GridSpec& grid, const MarketParams& params) {
  grid.validate();
  if (grid.b_max < params.psi.upper_bound() + params.s)
    throw std::invalid_argument(
        "grid.b_max: must be at least psi upper bound plus surplus s");
}

double ValueFunction::sup_norm() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

bool ValueFunction::all_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

double sup_distance(const ValueFunction& a, const ValueFunction& b) {
  const ValueFunction& coarse = a.grid.delta >= b.grid.delta ? a : b;
  const ValueFunction& other = a.grid.delta >= b.grid.delta ? b : a;
  double d = 0.0;
  const int n = coarse.grid.n();
  for (int i = 0; i < n; ++i) {
    const double x = coarse.grid.budget(i);
    d = std::max(d, std::abs(coarse.values[i] - other.at(x)));
  }
  return d;
}

std::vector<double> discretize(const RegenerationDistribution& psi, const GridSpec& grid) {
  const int n = grid.n();
  std::vector<double> mass(n, 0.0);
  switch (psi.kind()) {
    case RegenerationDistribution::Kind::kUniform: {
      if (psi.uniform_hi() == psi.uniform_lo()) {
        const auto lk = grid.locate(psi.uniform_lo());
        mass[lk.idx] += 1.0 - lk.frac;
        if (lk.frac > 0.0) mass[lk.idx + 1] += lk.frac;
        break;
      }
      for (int i = 0; i < n; ++i)
        mass[i] = psi.mass_in(grid.cell_lo(i), grid.cell_hi(i));
      // the top cell is closed at b_max
      mass[n - 1] += psi.mass_in(grid.cell_hi(n - 1), psi.upper_bound() + 1.0);
      break;
    }
    case RegenerationDistribution::Kind::kPoint: {
      const auto lk = grid.locate(psi.uniform_lo());
      mass[lk.idx] += 1.0 - lk.frac;
      if (lk.frac > 0.0) mass[lk.idx + 1] += lk.frac;
      break;
    }
    case RegenerationDistribution::Kind::kTabulated: {
      for (std::size_t j = 0; j < psi.atoms().size(); ++j) {
        const auto lk = grid.locate(psi.atoms()[j]);
        mass[lk.idx] += (1.0 - lk.frac) * psi.weights()[j];
        if (lk.frac > 0.0) mass[lk.idx + 1] += lk.frac * psi.weights()[j];
      }
      break;
    }
  }
  double total = 0.0;
  for (double m : mass) total += m;
  if (total <= 0.0) throw std::logic_error("discretize: regeneration mass vanished");
  for (double& m : mass) m /= total;
  return mass;
}

}  // namespace a2amkt
