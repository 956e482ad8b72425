#include "a2amkt/market.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace a2amkt {

const char* to_string(LoanModel model) {
  switch (model) {
    case LoanModel::kHard: return "hard";
    case LoanModel::kBank: return "bank";
    case LoanModel::kPeerLoan: return "peer-loan";
  }
  return "?";
}

LoanModel loan_model_from_string(const std::string& name) {
  if (name == "hard") return LoanModel::kHard;
  if (name == "bank") return LoanModel::kBank;
  if (name == "peer-loan" || name == "peer" || name == "loan") return LoanModel::kPeerLoan;
  throw std::invalid_argument("unknown loan model '" + name +
                              "' (expected hard|bank|peer-loan)");
}

RegenerationDistribution RegenerationDistribution::uniform(double lo, double hi) {
  RegenerationDistribution d;
  d.kind_ = Kind::kUniform;
  d.lo_ = lo;
  d.hi_ = hi;
  d.validate();
  return d;
}

RegenerationDistribution RegenerationDistribution::point(double value) {
  RegenerationDistribution d;
  d.kind_ = Kind::kPoint;
  d.lo_ = d.hi_ = value;
  d.validate();
  return d;
}

RegenerationDistribution RegenerationDistribution::tabulated(std::vector<double> atoms,
                                                             std::vector<double> weights) {
  RegenerationDistribution d;
  d.kind_ = Kind::kTabulated;
  // keep atoms ascending with their weights attached
  std::vector<std::size_t> order(atoms.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return atoms[a] < atoms[b]; });
  d.atoms_.reserve(atoms.size());
  d.weights_.reserve(weights.size());
  for (std::size_t i : order) {
    d.atoms_.push_back(atoms[i]);
    if (i < weights.size()) d.weights_.push_back(weights[i]);
  }
  d.lo_ = d.atoms_.empty() ? 0.0 : d.atoms_.front();
  d.hi_ = d.atoms_.empty() ? 0.0 : d.atoms_.back();
  d.validate();
  return d;
}

void RegenerationDistribution::validate() const {
  switch (kind_) {
    case Kind::kUniform:
    case Kind::kPoint:
      if (!(lo_ >= 0.0)) throw std::invalid_argument("psi: support must be >= 0");
      if (!(hi_ >= lo_)) throw std::invalid_argument("psi: needs lo <= hi");
      if (!std::isfinite(hi_)) throw std::invalid_argument("psi: support must be bounded");
      break;
    case Kind::kTabulated: {
      if (atoms_.empty()) throw std::invalid_argument("psi: tabulated support is empty");
      if (atoms_.size() != weights_.size())
        throw std::invalid_argument("psi: atoms/weights size mismatch");
      double total = 0.0;
      for (std::size_t i = 0; i < atoms_.size(); ++i) {
        if (!(atoms_[i] >= 0.0) || !std::isfinite(atoms_[i]))
          throw std::invalid_argument("psi: atoms must be finite and >= 0");
        if (i > 0 && atoms_[i] <= atoms_[i - 1])
          throw std::invalid_argument("psi: atoms must be strictly increasing");
        if (!(weights_[i] >= 0.0))
          throw std::invalid_argument("psi: weights must be >= 0");
        total += weights_[i];
      }
      if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("psi: weights must sum to 1");
      break;
    }
  }
}

double RegenerationDistribution::lower_bound() const {
  return kind_ == Kind::kTabulated ? atoms_.front() : lo_;
}

double RegenerationDistribution::upper_bound() const {
  return kind_ == Kind::kTabulated ? atoms_.back() : hi_;
}

double RegenerationDistribution::mean() const {
  switch (kind_) {
    case Kind::kUniform: return 0.5 * (lo_ + hi_);
    case Kind::kPoint: return lo_;
    case Kind::kTabulated: {
      double m = 0.0;
      for (std::size_t i = 0; i < atoms_.size(); ++i) m += atoms_[i] * weights_[i];
      return m;
    }
  }
  return 0.0;
}

double RegenerationDistribution::sample_from_unit(double u) const {
  switch (kind_) {
    case Kind::kUniform: return lo_ + u * (hi_ - lo_);
    case Kind::kPoint: return lo_;
    case Kind::kTabulated: {
      double acc = 0.0;
      for (std::size_t i = 0; i < atoms_.size(); ++i) {
        acc += weights_[i];
        if (u < acc) return atoms_[i];
      }
      return atoms_.back();
    }
  }
  return lo_;
}

double RegenerationDistribution::mass_in(double lo, double hi) const {
  if (hi <= lo) return 0.0;
  switch (kind_) {
    case Kind::kUniform: {
      if (hi_ == lo_) return (lo_ >= lo && lo_ < hi) ? 1.0 : 0.0;
      const double a = std::max(lo, lo_);
      const double b = std::min(hi, hi_);
      return b > a ? (b - a) / (hi_ - lo_) : 0.0;
    }
    case Kind::kPoint:
      return (lo_ >= lo && lo_ < hi) ? 1.0 : 0.0;
    case Kind::kTabulated: {
      double m = 0.0;
      for (std::size_t i = 0; i < atoms_.size(); ++i)
        if (atoms_[i] >= lo && atoms_[i] < hi) m += weights_[i];
      return m;
    }
  }
  return 0.0;
}

std::string RegenerationDistribution::describe() const {
  char buf[64];
  switch (kind_) {
    case Kind::kUniform:
      std::snprintf(buf, sizeof buf, "U[%g,%g]", lo_, hi_);
      return buf;
    case Kind::kPoint:
      std::snprintf(buf, sizeof buf, "point[%g]", lo_);
      return buf;
    case Kind::kTabulated:
      std::snprintf(buf, sizeof buf, "tabulated[%zu]", atoms_.size());
      return buf;
  }
  return "?";
}

void MarketParams::validate() const {
  auto bad = [](const std::string& msg) { throw std::invalid_argument("params." + msg); };
  if (!(p_c > 0.0 && p_c < 1.0)) bad("p_c: must lie in (0,1)");
  if (!(p_s > 0.0 && p_s < 1.0)) bad("p_s: must lie in (0,1)");
  if (std::abs(p_c + p_s - 1.0) > 1e-12) bad("p_c/p_s: must sum to 1");
  if (!(beta > 0.0 && beta < 1.0)) bad("beta: must lie in (0,1)");
  if (!(alpha >= 1.0)) bad("alpha: must be >= 1");
  if (!(s > 0.0) || !std::isfinite(s)) bad("s: must be positive and finite");
  if (!(c_serve >= 0.0)) bad("c_serve: must be >= 0");
  if (!(c_lose >= 0.0)) bad("c_lose: must be >= 0");
  if (!(k >= 0.0) || !std::isfinite(k)) bad("k: must be >= 0 and finite");
  psi.validate();
}

std::vector<std::string> MarketParams::band_warnings() const {
  std::vector<std::string> w;
  if (k < c_serve)
    w.push_back("k < c_serve: servers trade at a loss");
  if (s - k < c_lose)
    w.push_back("s - k < c_lose: price outside the non-trivial band");
  return w;
}

bool resolve_trade(double client_bid, double server_ask) {
  if (client_bid < 0.0 || server_ask < 0.0)
    throw std::invalid_argument("resolve_trade: bids must be >= 0");
  return client_bid >= server_ask;
}

double max_client_bid(double budget, const MarketParams& params, LoanModel model) {
  if (budget < 0.0) throw std::invalid_argument("max_client_bid: budget must be >= 0");
  if (model == LoanModel::kHard) return budget;
  return budget + params.s / (1.0 + params.alpha);
}

double client_budget_update(double budget, const MarketParams& params, LoanModel model) {
  if (params.k > max_client_bid(budget, params, model) + 1e-12)
    throw std::invalid_argument("client_budget_update: price exceeds the bid cap");
  const double overdraft = model == LoanModel::kHard ? 0.0 : std::max(0.0, params.k - budget);
  double next = budget + params.s - params.k - params.alpha * overdraft;
  if (next < 0.0) next = 0.0;  // cap boundary can leave -1e-16 dust
  return next;
}

double server_budget_update(double server_budget, double client_budget,
                            const MarketParams& params, LoanModel model) {
  double next = server_budget + params.k - params.c_serve;
  if (model == LoanModel::kPeerLoan)
    next += params.alpha * std::max(0.0, params.k - client_budget);
  return next;
}

TradeOutcome settle_trade(double client_budget, double server_budget, double client_bid,
                          const MarketParams& params, LoanModel model) {
  TradeOutcome out;
  out.traded = resolve_trade(client_bid, params.k);
  if (!out.traded) {
    out.client_penalty_incurred = true;
    return out;
  }
  out.price_paid = params.k;
  out.overdraft = model == LoanModel::kHard ? 0.0 : std::max(0.0, params.k - client_budget);
  out.client_delta = client_budget_update(client_budget, params, model) - client_budget;
  out.server_delta =
      server_budget_update(server_budget, client_budget, params, model) - server_budget;
  return out;
}

double wealth_delta(const TradeOutcome& outcome, LoanModel model) {
  (void)model;  // the recipient of the premium does not change the total
  if (!outcome.traded)
    throw std::invalid_argument("wealth_delta: outcome did not trade");
  return outcome.client_delta + outcome.server_delta;
}

double regenerate(SeqRng& rng, const RegenerationDistribution& psi) {
  return psi.sample(rng);
}

}  // namespace a2amkt
