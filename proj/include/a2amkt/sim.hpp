#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "a2amkt/dp.hpp"
#include "a2amkt/market.hpp"
#include "a2amkt/mfe.hpp"

namespace a2amkt {

struct SimConfig {
  int n_agents = 100000;
  int n_steps = 2000;
  MarketParams params;
  LoanModel model = LoanModel::kBank;
  std::uint64_t seed = 1;
  GridSpec grid;

  int policy_refresh_period = 10;  // steps between best-response recomputations
  int belief_window = 10;          // steps pooled into the empirical-z estimate
  double initial_belief = 1.0;     // cold market
  double dp_tol = 1e-8;
  PolicyOptions policy_opts;

  // When set, best-response dynamics are disabled and this policy is played
  // for the whole run (MFE-consistency experiments).
  std::optional<ClientPolicy> frozen_policy;
  // Exogenous peer-loan premium to pair with a frozen policy.
  double frozen_premium = 0.0;
  // Initial budgets sampled from this distribution instead of psi; the
  // stationarity experiments start from the solved pi.
  std::optional<StationaryDistribution> initial_pi;

  void validate() const;
};

struct EpochMetrics {
  int step = 0;
  long matches = 0;
  long trades = 0;
  long bids_zero = 0;
  double empirical_z = 0.0;  // bid-0 share among matched clients
  double trade_ratio = 0.0;  // trades / matches
  double belief = 0.0;       // policy belief in force this step
  double mean_budget = 0.0;
  double total_wealth = 0.0;
  double q05 = 0, q25 = 0, q50 = 0, q75 = 0, q95 = 0;
  double bank_take = 0.0;     // repayments leaving the system (bank model)
  double premium_paid = 0.0;  // repayments redirected to servers (peer loan)
  long deaths = 0;
  double wealth_removed = 0.0;   // budgets of departing agents
  double wealth_injected = 0.0;  // budgets of regenerated agents
  double trade_delta_sum = 0.0;  // sum of client+server budget deltas
};

struct SimSummary {
  double terminal_z = 0.0;          // pooled over the terminal window
  double terminal_trade_ratio = 0.0;
  double terminal_z_se = 0.0;       // batch-means standard error of per-step z
  int terminal_window = 0;
  double final_belief = 0.0;
  double final_premium = 0.0;
  double mean_budget = 0.0;
  long total_trades = 0;
  long total_matches = 0;
};

struct SimResult {
  std::vector<EpochMetrics> series;
  SimSummary summary;
  std::vector<double> final_budgets;
};

// Pooled bid-0 share over a window of steps; falls back when nothing matched.
double empirical_belief(std::span<const EpochMetrics> window, double fallback);

// One synchronous step: survival/regeneration, role draws, uniform random
// matching, bids, settlement, metrics.  Exposed for kernel-agreement tests.
EpochMetrics sim_step(std::vector<double>& budgets, int step, const ClientPolicy& policy,
                      const MarketParams& params, LoanModel model, std::uint64_t seed);

// Full run with periodic best-response policy refreshes.
SimResult run(const SimConfig& config);

// ----- coupled two-region simulation (case study) ------------------------

struct RegionSpec {
  double p_c = 0.5;  // share of mixed hours in which this region is the client side
  RegenerationDistribution psi = RegenerationDistribution::uniform(5.0, 10.0);
  std::string label;
};

// Per-step joint weather state.
enum class HourState : std::uint8_t {
  kIdleBothGood = 0,
  kIdleBothBad = 1,
  kClientA = 2,  // region A buys, region B serves
  kClientB = 3,
};

struct CoupledSimConfig {
  int n_per_region = 20000;
  int n_steps = 1500;
  MarketParams params;  // shared scalars; psi/p_c come from the regions
  RegionSpec region_a, region_b;
  // probabilities of the four hour states, in HourState order; ignored when a
  // trace replay is supplied
  double state_probs[4] = {0.44, 0.11, 0.28, 0.17};
  std::vector<HourState> replay;  // optional recorded trace, cycled
  LoanModel model = LoanModel::kBank;
  std::uint64_t seed = 1;
  GridSpec grid;
  int policy_refresh_period = 10;
  int belief_window = 10;
  double initial_belief = 1.0;
  double dp_tol = 1e-8;
  PolicyOptions policy_opts;

  void validate() const;
};

struct CoupledEpochMetrics {
  int step = 0;
  HourState state = HourState::kIdleBothGood;
  long matches = 0;
  long trades = 0;
  double belief_a = 1.0;  // belief about region-A clients
  double belief_b = 1.0;
  double empirical_z = 0.0;  // of the active client side this step
  double mean_budget_a = 0.0;
  double mean_budget_b = 0.0;
};

struct CoupledSimResult {
  std::vector<CoupledEpochMetrics> series;
  double joint_trade_ratio = 0.0;  // pooled over all mixed hours
  long total_matches = 0;
  long total_trades = 0;
  std::vector<double> final_budgets_a;
  std::vector<double> final_budgets_b;
  // first step at which the tracked belief fell below the threshold, and the
  // running belief sum up to that step (deterministic tie-break)
  int first_step_below(double threshold, bool region_a) const;
  double belief_area(bool region_a) const;
};

CoupledSimResult run_coupled(const CoupledSimConfig& config);

// ----- sweep harness ------------------------------------------------------

enum class SweepMode { kSolve, kSimulate };

struct SweepCellResult {
  double k = 0.0;
  std::string psi;
  double trade_ratio = 0.0;
  double expected_value = 0.0;
  double z_star = 0.0;
  double residual = 0.0;
  bool converged = false;
  bool flagged = false;  // price outside the non-trivial band
  std::string error;     // empty on success
};

struct SweepRequest {
  MarketParams base;
  LoanModel model = LoanModel::kBank;
  GridSpec grid;
  std::vector<double> k_values;
  std::vector<RegenerationDistribution> psi_options;
  SweepMode mode = SweepMode::kSolve;
  SolveOptions solve;
  SimConfig sim;  // used in simulate mode (params/model overridden per cell)
  std::uint64_t seed = 1;
  int workers = 1;
};

// One solve or simulation per (psi, k) cell; per-cell failures are recorded
// and the sweep continues.  Results are ordered by (psi index, k index)
// regardless of worker count.
std::vector<SweepCellResult> sweep(const SweepRequest& request);

}  // namespace a2amkt
