#pragma once

#include <utility>
#include <vector>

#include "a2amkt/dp.hpp"
#include "a2amkt/grid.hpp"
#include "a2amkt/market.hpp"

namespace a2amkt {

// One-step budget transition kernel P = beta*Q + (1-beta)*psi, stored as the
// sparse trade/stay part Q (row-stochastic) plus the shared regeneration row.
struct BudgetKernel {
  GridSpec grid;
  double beta = 0.0;
  std::vector<int> row_ptr;   // size n+1, into col/prob
  std::vector<int> col;
  std::vector<double> prob;   // Q entries, each row sums to 1
  std::vector<double> regen;  // psi cell masses, sums to 1

  // y = x P for a probability vector x.
  void push_forward(const std::vector<double>& x, std::vector<double>& y) const;
  double row_sum(int i) const;  // full row including regeneration
};

struct StationaryDistribution {
  GridSpec grid;
  std::vector<double> mass;

  double total() const;
  double mass_below(double b) const;  // cells with representative strictly below b
  double quantile(double q) const;
};

// Fraction of each grid cell on which the policy bids 0; boundary cells split
// by the exact switch points.
std::vector<double> bid_zero_fractions(const ClientPolicy& policy, const GridSpec& grid);

// Distribution of the overdraft repayment a peer-loan server collects per
// served trade, induced by the borrowing clients' budget distribution.
struct PremiumDistribution {
  std::vector<double> repay;   // ascending, repay[0] may be 0
  std::vector<double> weight;  // sums to 1

  double mean() const;
  static PremiumDistribution constant(double value);
  // repayments implied by the bid-k part of a budget distribution
  static PremiumDistribution from_population(const StationaryDistribution& pi,
                                             const std::vector<double>& bid_zero_fraction,
                                             const MarketParams& params);
};

BudgetKernel budget_kernel(Belief belief, const ClientPolicy& policy,
                           const MarketParams& params, LoanModel model, const GridSpec& grid,
                           double peer_premium = 0.0);

// Finite-population matching: with binomial role draws only min(#clients,
// #servers) pairs form, so each role transacts slightly less often than the
// mean field assumes.  Rates of 1 recover the exact mean-field kernel.
struct MatchThinning {
  double client = 1.0;
  double server = 1.0;
};

// Expected per-role match probabilities at population size n (normal
// approximation of the binomial role split).
MatchThinning expected_match_rates(int n_agents, const MarketParams& params);

// Peer-loan kernel with the served-trade jump spread over the repayment
// distribution instead of its mean.
BudgetKernel budget_kernel(Belief belief, const ClientPolicy& policy,
                           const MarketParams& params, LoanModel model, const GridSpec& grid,
                           const PremiumDistribution& premium,
                           const MatchThinning& thinning = {});

StationaryDistribution stationary_distribution(const BudgetKernel& kernel, double tol = 1e-10,
                                               long max_iters = 2000000,
                                               const StationaryDistribution* warm = nullptr);

struct SolveOptions {
  double z0 = 1.0;        // cold-market start
  double damping = 0.5;   // fraction of the best-response step taken
  double tol = 1e-6;      // fixed-point residual target |gamma(z) - z|
  int max_iters = 200;
  double dp_tol = 1e-8;
  double pi_tol = 1e-10;
  double premium_tol = 1e-7;  // peer-loan premium self-consistency
  bool premium_in_reward = true;
  PolicyOptions policy;
  // finite-population correction for solver-vs-simulation comparisons;
  // defaults to the exact mean field
  MatchThinning thinning;
};

// Carries warm starts between gamma evaluations of one solve.
struct MfeWorkspace {
  ValueFunction v;
  StationaryDistribution pi;
  double peer_premium = 0.0;
  bool warm = false;
};

struct GammaEval {
  double gamma = 0.0;
  double peer_premium = 0.0;  // self-consistent premium at this z (peer loan)
  DpResult dp;
  ClientPolicy policy;
  StationaryDistribution pi;
};

// The belief map gamma(z) = pi_z(bid-0 region).  For the peer-loan model the
// mean-field premium is resolved self-consistently inside the evaluation.
GammaEval eval_gamma(Belief belief, const MarketParams& params, LoanModel model,
                     const GridSpec& grid, const SolveOptions& opts = {},
                     MfeWorkspace* ws = nullptr);

struct FixedPointReport {
  double z_star = 0.0;
  double residual = 0.0;
  int iterations = 0;
  double trade_ratio = 0.0;  // 1 - z_star
  double peer_premium = 0.0;
  double expected_value = 0.0;  // E_psi[v*] at the fixed point
  bool converged = false;
  ClientPolicy policy;
  ValueFunction value;
  StationaryDistribution pi;
  std::vector<std::pair<double, double>> trace;  // (z, gamma(z)) visited
};

// Damped best-response iteration from z0 with a bisection fallback on
// gamma(z) - z when the iteration stalls or oscillates.
FixedPointReport solve_mfe(const MarketParams& params, LoanModel model, const GridSpec& grid,
                           const SolveOptions& opts = {});

// Scans several starting beliefs and reports the distinct fixed points found.
std::vector<FixedPointReport> solve_mfe_multistart(const MarketParams& params, LoanModel model,
                                                   const GridSpec& grid,
                                                   const SolveOptions& opts = {},
                                                   const std::vector<double>& starts = {
                                                       0.0, 0.25, 0.5, 0.75, 1.0});

struct TypeProfile {
  int type_id = 0;
  double p_c = 0.5;
  double p_s = 0.5;
  RegenerationDistribution psi = RegenerationDistribution::uniform(5.0, 10.0);
  std::string label;
};

struct CoupledReport {
  FixedPointReport a, b;
  double joint_trade_ratio = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Two coupled populations with cross-type matching: type A's servers face
// type B's clients (belief z_b) and vice versa.  Alternating damped updates.
CoupledReport solve_coupled_mfe(const TypeProfile& type_a, const TypeProfile& type_b,
                                const MarketParams& base, LoanModel model,
                                const GridSpec& grid, const SolveOptions& opts = {});

}  // namespace a2amkt
