#pragma once

#include <string>
#include <vector>

#include "a2amkt/dp.hpp"
#include "a2amkt/grid.hpp"
#include "a2amkt/market.hpp"

namespace a2amkt {

// Discrete bid distribution with general support; the small-scale setting in
// which the structural market claims are checked numerically.
struct DiscreteBidDist {
  std::vector<double> support;  // ascending, distinct, nonnegative
  std::vector<double> mass;     // sums to 1

  void validate() const;
  double pmf(double x) const;
  double upper() const { return support.back(); }
  // P(bid <= x), inclusive at support points
  double cdf(double x) const;
};

struct DominanceResult {
  double kappa = 0.0;        // expected trade ratio before the merge
  double kappa_prime = 0.0;  // after all servers move to k_prime
  bool dominated = false;    // kappa_prime >= kappa
  bool conclusive = true;    // affordability assumption held
};

// Trade-ratio comparison when all server mass merges to one price inside the
// old support.  affordable_cap is the bid cap of the poorest client, supplied
// by the caller.
DominanceResult single_price_dominance(const DiscreteBidDist& server_dist,
                                       const DiscreteBidDist& client_dist, double k_prime,
                                       double affordable_cap);

struct FactViolation {
  int fact = 0;  // 1..4
  double bid = 0.0;
  std::string what;
};

// Flags bid mass that could never pay off against the opposing distribution.
std::vector<FactViolation> equilibrium_facts_audit(const DiscreteBidDist& server_dist,
                                                   const DiscreteBidDist& client_dist);

struct LipschitzReport {
  double max_ratio = 0.0;
  double bound = 0.0;  // (k - c_serve) / (1 - beta)
  bool within = false;
  std::vector<double> z_samples;
};

// Max sup-norm slope of z -> v*_z over sample pairs versus the analytic bound.
LipschitzReport lipschitz_probe(const MarketParams& params, LoanModel model,
                                const GridSpec& grid, const std::vector<double>& z_samples,
                                double dp_tol = 1e-8);

// Switch counts of the extracted policy on the comparison band at several
// grid refinements; finite-piece structure means the counts must stabilize.
std::vector<int> policy_piece_audit(const MarketParams& params, LoanModel model, double z,
                                    const std::vector<GridSpec>& refinements,
                                    double dp_tol = 1e-8);

// General discrete-belief Bellman operator (toy scale): the agent chooses an
// ask and a feasible bid from the action set against arbitrary opposing bid
// distributions.  Used as an independent oracle for the unified-price DP.
ValueFunction general_bellman_apply(const ValueFunction& v,
                                    const DiscreteBidDist& server_belief,
                                    const DiscreteBidDist& client_belief,
                                    const std::vector<double>& action_set,
                                    const MarketParams& params);

ValueFunction general_value_iterate(const DiscreteBidDist& server_belief,
                                    const DiscreteBidDist& client_belief,
                                    const std::vector<double>& action_set,
                                    const MarketParams& params, const GridSpec& grid,
                                    double tol = 1e-8, long max_iters = 1000000);

}  // namespace a2amkt
