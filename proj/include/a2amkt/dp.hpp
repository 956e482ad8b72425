#pragma once

#include <vector>

#include "a2amkt/grid.hpp"
#include "a2amkt/market.hpp"

namespace a2amkt {

// Population belief under the unified price: servers always ask k, a matched
// client bids 0 with probability z and k otherwise.
struct Belief {
  double z = 0.0;
};

struct DpOptions {
  double tol = 1e-8;          // sup-norm Bellman residual target
  long max_iters = 1000000;
  // Peer-loan mean-field premium: expected overdraft repayment received per
  // served trade, exogenous within one solve.
  double peer_premium = 0.0;
  // Whether the premium also counts as instantaneous server reward (it always
  // enters the server's budget transition).
  bool premium_in_reward = true;
};

struct DpResult {
  ValueFunction v;
  long iterations = 0;
  double residual = 0.0;
};

struct PolicyOptions {
  double tie_tol_scale = 1e-9;  // tie tolerance = scale * (1 + ||v||_inf)
  double p_tie = 0.0;           // probability of bidding 0 at an exact tie
};

// Client best response as switch intervals over the budget line.  The action
// alternates between bid-0 and bid-k at each switch point; budgets exactly at
// a switch are treated as ties (bid k unless p_tie says otherwise).
struct ClientPolicy {
  double k = 0.0;
  bool first_bids_zero = true;        // action on [0, first switch)
  std::vector<double> switch_points;  // strictly ascending
  std::vector<double> tie_points;
  double p_tie = 0.0;

  bool bids_k(double b) const;
  // Lebesgue measure of the bid-0 set intersected with [lo, hi].
  double bid_zero_measure(double lo, double hi) const;
  // Number of maximal constant pieces intersecting [lo, hi].
  int piece_count(double lo, double hi) const;
};

// Feasibility threshold: below it a client cannot cover k even with the
// allowed overdraft (Hard: without her own budget).
double bid_feasibility_threshold(const MarketParams& params, LoanModel model);
// Above this budget, bidding k is optimal independently of the value function
// whenever the price sits in the non-trivial band.
double always_bid_threshold(const MarketParams& params);

// One application of the unified-price Bellman operator.
ValueFunction bellman_apply(const ValueFunction& v, Belief belief, const MarketParams& params,
                            LoanModel model, const DpOptions& opts = {});

// Value iteration to a fixed point; optional warm start.
DpResult value_iterate(Belief belief, const MarketParams& params, LoanModel model,
                       const GridSpec& grid, const DpOptions& opts = {},
                       const ValueFunction* warm = nullptr);

// Threshold-policy extraction from a converged value function.  Switch points
// inside the comparison band are refined by bisection beyond grid resolution.
ClientPolicy extract_client_policy(const ValueFunction& v, Belief belief,
                                   const MarketParams& params, LoanModel model,
                                   const PolicyOptions& opts = {});

struct ServerBidCheck {
  bool all_prefer_k = true;
  bool all_tied = false;  // z == 1 degenerate case
  std::vector<double> violating_budgets;
};

// Verifies that asking k dominates asking 0 for every grid budget.
ServerBidCheck server_best_response_check(const ValueFunction& v, Belief belief,
                                          const MarketParams& params,
                                          const DpOptions& opts = {});

// Largest root of c_serve = x * beta^(x - s/(1+alpha) - b̄_init); throws
// std::runtime_error when the standing assumption R >= c_serve fails.
double server_bid_upper_bound(const MarketParams& params);

// E_psi[v]: quadrature of the piecewise-linear value function against the
// regeneration distribution.
double expected_value(const ValueFunction& v, const RegenerationDistribution& psi);

}  // namespace a2amkt
