#include "a2amkt/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace a2amkt {

void DiscreteBidDist::validate() const {
  if (support.empty()) throw std::invalid_argument("bid dist: empty support");
  if (support.size() != mass.size())
    throw std::invalid_argument("bid dist: support/mass size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (!(support[i] >= 0.0)) throw std::invalid_argument("bid dist: bids must be >= 0");
    if (i > 0 && support[i] <= support[i - 1])
      throw std::invalid_argument("bid dist: support must be strictly increasing");
    if (!(mass[i] >= 0.0)) throw std::invalid_argument("bid dist: masses must be >= 0");
    total += mass[i];
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("bid dist: masses must sum to 1");
}

double DiscreteBidDist::pmf(double x) const {
  for (std::size_t i = 0; i < support.size(); ++i)
    if (support[i] == x) return mass[i];
  return 0.0;
}

double DiscreteBidDist::cdf(double x) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < support.size() && support[i] <= x; ++i) acc += mass[i];
  return acc;
}

DominanceResult single_price_dominance(const DiscreteBidDist& server_dist,
                                       const DiscreteBidDist& client_dist, double k_prime,
                                       double affordable_cap) {
  server_dist.validate();
  client_dist.validate();
  if (k_prime < server_dist.support.front() - 1e-12 ||
      k_prime > server_dist.upper() + 1e-12)
    throw std::invalid_argument("single_price_dominance: k' outside the server support");

  DominanceResult res;
  // the lemma assumes every client can afford the merged price and every old
  // server bid it might have chased
  if (affordable_cap + 1e-12 < std::max(k_prime, server_dist.upper())) {
    res.conclusive = false;
    return res;
  }

  for (std::size_t c = 0; c < client_dist.support.size(); ++c)
    for (std::size_t s = 0; s < server_dist.support.size(); ++s)
      if (client_dist.support[c] >= server_dist.support[s])
        res.kappa += client_dist.mass[c] * server_dist.mass[s];

  // clients whose bid could win before follow the merged price; bidding k'
  // keeps a positive payoff while dropping out yields none
  for (std::size_t c = 0; c < client_dist.support.size(); ++c)
    if (server_dist.cdf(client_dist.support[c]) > 0.0)
      res.kappa_prime += client_dist.mass[c];

  res.dominated = res.kappa_prime >= res.kappa - 1e-12;
  return res;
}

std::vector<FactViolation> equilibrium_facts_audit(const DiscreteBidDist& server_dist,
                                                   const DiscreteBidDist& client_dist) {
  server_dist.validate();
  client_dist.validate();
  std::vector<FactViolation> out;
  const double tol = 1e-12;

  for (std::size_t c = 0; c < client_dist.support.size(); ++c) {
    const double x = client_dist.support[c];
    if (client_dist.mass[c] <= 0.0) continue;
    if (x > server_dist.upper() + tol)
      out.push_back({1, x, "client bids above the top server ask"});
    else if (x > 0.0 && server_dist.pmf(x) == 0.0)
      out.push_back({3, x, "client bids where servers put no mass"});
  }
  for (std::size_t s = 0; s < server_dist.support.size(); ++s) {
    const double x = server_dist.support[s];
    if (server_dist.mass[s] <= 0.0) continue;
    if (x > client_dist.upper() + tol)
      out.push_back({2, x, "server asks above the top client bid"});
    else if (client_dist.pmf(x) == 0.0)
      out.push_back({4, x, "server asks where clients put no mass"});
  }
  return out;
}

LipschitzReport lipschitz_probe(const MarketParams& params, LoanModel model,
                                const GridSpec& grid, const std::vector<double>& z_samples,
                                double dp_tol) {
  if (z_samples.size() < 2)
    throw std::invalid_argument("lipschitz_probe: needs at least two z samples");
  LipschitzReport rep;
  rep.z_samples = z_samples;
  rep.bound = (params.k - params.c_serve) / (1.0 - params.beta);

  DpOptions opts;
  opts.tol = dp_tol;
  std::vector<ValueFunction> solved;
  solved.reserve(z_samples.size());
  const ValueFunction* warm = nullptr;
  for (double z : z_samples) {
    auto dp = value_iterate(Belief{z}, params, model, grid, opts, warm);
    solved.push_back(std::move(dp.v));
    warm = &solved.back();
  }
  for (std::size_t i = 0; i < solved.size(); ++i)
    for (std::size_t j = i + 1; j < solved.size(); ++j) {
      const double dz = std::abs(z_samples[i] - z_samples[j]);
      if (dz == 0.0) continue;
      rep.max_ratio = std::max(rep.max_ratio, sup_distance(solved[i], solved[j]) / dz);
    }
  rep.within = rep.max_ratio <= rep.bound + 1e-6;
  return rep;
}

std::vector<int> policy_piece_audit(const MarketParams& params, LoanModel model, double z,
                                    const std::vector<GridSpec>& refinements, double dp_tol) {
  std::vector<int> counts;
  DpOptions opts;
  opts.tol = dp_tol;
  const double hi = always_bid_threshold(params);
  for (const auto& grid : refinements) {
    auto dp = value_iterate(Belief{z}, params, model, grid, opts);
    auto policy = extract_client_policy(dp.v, Belief{z}, params, model);
    counts.push_back(policy.piece_count(0.0, std::max(0.0, hi)));
  }
  return counts;
}

ValueFunction general_bellman_apply(const ValueFunction& v,
                                    const DiscreteBidDist& server_belief,
                                    const DiscreteBidDist& client_belief,
                                    const std::vector<double>& action_set,
                                    const MarketParams& params) {
  server_belief.validate();
  client_belief.validate();
  if (action_set.empty()) throw std::invalid_argument("general bellman: empty action set");

  const int n = v.grid.n();
  ValueFunction out{v.grid, std::vector<double>(n, 0.0)};
  for (int i = 0; i < n; ++i) {
    const double b = v.grid.budget(i);

    // server side: pick the ask with the best expected stage value
    double best_server = -std::numeric_limits<double>::infinity();
    for (double ask : action_set) {
      double val = 0.0;
      for (std::size_t c = 0; c < client_belief.support.size(); ++c) {
        if (client_belief.support[c] >= ask) {
          const double nb = std::max(0.0, b + ask - params.c_serve);
          val += client_belief.mass[c] *
                 (params.beta * v.at(nb) + ask - params.c_serve);
        } else {
          val += client_belief.mass[c] * params.beta * v.at(b);
        }
      }
      best_server = std::max(best_server, val);
    }

    // client side: bids capped by the financing rule; pays the server's ask
    const double cap = b + params.s / (1.0 + params.alpha);
    double best_client = -std::numeric_limits<double>::infinity();
    for (double bid : action_set) {
      if (bid > cap + 1e-12) continue;
      double val = 0.0;
      for (std::size_t s = 0; s < server_belief.support.size(); ++s) {
        const double ask = server_belief.support[s];
        if (bid >= ask) {
          const double od = std::max(0.0, ask - b);
          const double nb = std::max(0.0, b + params.s - ask - params.alpha * od);
          val += server_belief.mass[s] *
                 (params.beta * v.at(nb) + params.s - ask);
        } else {
          val += server_belief.mass[s] * (params.beta * v.at(b) - params.c_lose);
        }
      }
      best_client = std::max(best_client, val);
    }
    if (!std::isfinite(best_client))  // nothing affordable: decline
      best_client = params.beta * v.at(b) - params.c_lose;

    out.values[i] = params.p_s * best_server + params.p_c * best_client;
  }
  return out;
}

ValueFunction general_value_iterate(const DiscreteBidDist& server_belief,
                                    const DiscreteBidDist& client_belief,
                                    const std::vector<double>& action_set,
                                    const MarketParams& params, const GridSpec& grid,
                                    double tol, long max_iters) {
  ValueFunction v{grid, std::vector<double>(grid.n(), 0.0)};
  for (long it = 0; it < max_iters; ++it) {
    ValueFunction next = general_bellman_apply(v, server_belief, client_belief, action_set,
                                               params);
    double resid = 0.0;
    for (int i = 0; i < grid.n(); ++i)
      resid = std::max(resid, std::abs(next.values[i] - v.values[i]));
    v = std::move(next);
    if (resid <= tol) return v;
  }
  throw std::runtime_error("general_value_iterate: no convergence");
}

}  // namespace a2amkt
