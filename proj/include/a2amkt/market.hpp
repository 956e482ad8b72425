#pragma once

#include <string>
#include <vector>

#include "a2amkt/rng.hpp"

namespace a2amkt {

// Financing rule for clients that cannot cover the unified price from their
// own budget.
enum class LoanModel {
  kHard,      // no overdraft: a client may bid at most her budget
  kBank,      // overdraft repaid with factor alpha to an external bank
  kPeerLoan,  // overdraft repaid with factor alpha to the matched server
};

const char* to_string(LoanModel model);
LoanModel loan_model_from_string(const std::string& name);

// Budget distribution of freshly regenerated agents.
class RegenerationDistribution {
 public:
  enum class Kind { kUniform, kPoint, kTabulated };

  static RegenerationDistribution uniform(double lo, double hi);
  static RegenerationDistribution point(double value);
  static RegenerationDistribution tabulated(std::vector<double> atoms,
                                            std::vector<double> weights);

  Kind kind() const { return kind_; }
  double lower_bound() const;
  double upper_bound() const;  // b̄_init; finite by construction
  double mean() const;

  // Inverse-CDF sample from one uniform draw in [0,1).
  double sample_from_unit(double u) const;
  double sample(SeqRng& rng) const { return sample_from_unit(rng.uniform()); }

  // Mass assigned to the interval [lo, hi).
  double mass_in(double lo, double hi) const;

  const std::vector<double>& atoms() const { return atoms_; }
  const std::vector<double>& weights() const { return weights_; }
  double uniform_lo() const { return lo_; }
  double uniform_hi() const { return hi_; }

  void validate() const;
  std::string describe() const;  // e.g. "U[0,5]", "point[5]"

  bool operator==(const RegenerationDistribution&) const = default;

 private:
  Kind kind_ = Kind::kUniform;
  double lo_ = 0.0, hi_ = 5.0;        // uniform / point support
  std::vector<double> atoms_;         // tabulated support, ascending
  std::vector<double> weights_;       // tabulated masses, sum to 1
};

// All scalar market constants plus the regeneration distribution.
struct MarketParams {
  double p_c = 0.5;      // probability of drawing the client role
  double p_s = 0.5;      // probability of drawing the server role
  double beta = 0.98;    // per-period survival probability
  double alpha = 1.1;    // overdraft repayment factor (>= 1)
  double s = 8.0;        // client surplus from a successful trade
  double c_serve = 6.0;  // server's cost of providing service
  double c_lose = 0.5;   // client disutility on a failed trade (never hits budgets)
  double k = 7.0;        // unified price
  RegenerationDistribution psi = RegenerationDistribution::uniform(0.0, 5.0);

  void validate() const;  // throws std::invalid_argument on violations
  // Prices outside c_serve <= k <= s - c_lose are legal but economically
  // degenerate; reports should surface these.
  std::vector<std::string> band_warnings() const;

  bool operator==(const MarketParams&) const = default;
};

struct AgentState {
  double budget = 0.0;
  bool alive = true;
  int type_id = 0;
};

struct TradeOutcome {
  bool traded = false;
  double price_paid = 0.0;
  double overdraft = 0.0;      // (k - client_pre_budget)^+, zero under Hard
  double client_delta = 0.0;   // budget change of the client
  double server_delta = 0.0;   // budget change of the server
  bool client_penalty_incurred = false;  // c_lose applies (failed trade)
};

// Trade succeeds iff the client's bid covers the server's ask.
bool resolve_trade(double client_bid, double server_ask);

// Largest bid a client with budget b may place without risking a negative
// post-trade budget.
double max_client_bid(double budget, const MarketParams& params, LoanModel model);

// Post-trade budget of a client that paid the unified price k.
// Precondition: k <= max_client_bid(budget).
double client_budget_update(double budget, const MarketParams& params, LoanModel model);

// Post-trade budget of the matched server; the peer-loan premium depends on
// the client's pre-trade budget.
double server_budget_update(double server_budget, double client_budget,
                            const MarketParams& params, LoanModel model);

// Full settlement of one matched pair given the client's bid (server asks k).
TradeOutcome settle_trade(double client_budget, double server_budget, double client_bid,
                          const MarketParams& params, LoanModel model);

// Change in total system wealth caused by one successful trade.
double wealth_delta(const TradeOutcome& outcome, LoanModel model);

// Fresh budget for a regenerated agent.
double regenerate(SeqRng& rng, const RegenerationDistribution& psi);

}  // namespace a2amkt
