#include "a2amkt/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace a2amkt {

namespace {

// purpose tags for the counter-based draw streams
enum Stream : std::uint64_t {
  kStreamInit = 1,
  kStreamSurvive = 2,
  kStreamRegen = 3,
  kStreamRole = 4,
  kStreamMatch = 5,
  kStreamWeather = 6,
  kStreamTie = 7,
  kStreamInitJitter = 8,
};

// inverse-CDF draw from a grid distribution, spread uniformly over the cell
double sample_pi(const StationaryDistribution& pi, double u, double jitter) {
  double acc = 0.0;
  const int n = pi.grid.n();
  for (int i = 0; i < n; ++i) {
    acc += pi.mass[i];
    if (u < acc)
      return pi.grid.cell_lo(i) + jitter * (pi.grid.cell_hi(i) - pi.grid.cell_lo(i));
  }
  return pi.grid.b_max;
}

inline std::uint64_t agent_key(int step, int agent) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(step)) << 32) |
         static_cast<std::uint32_t>(agent);
}

template <typename T>
void shuffle_indices(std::vector<T>& v, SeqRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(v[i - 1], v[j]);
  }
}

struct StepBuffers {
  std::vector<int> clients;
  std::vector<int> servers;
  std::vector<std::uint8_t> idle;  // regenerated this step, sits out
  std::vector<double> scratch;     // quantile workspace
};

double quantile_of(std::vector<double>& scratch, double q) {
  const std::size_t pos = static_cast<std::size_t>(q * (scratch.size() - 1));
  std::nth_element(scratch.begin(), scratch.begin() + pos, scratch.end());
  return scratch[pos];
}

// One synchronous market step over a single homogeneous population.
EpochMetrics step_impl(StepBuffers& buf, std::vector<double>& budgets, int step,
                       const ClientPolicy& policy, const MarketParams& params,
                       LoanModel model, std::uint64_t seed) {
  const int n = static_cast<int>(budgets.size());
  EpochMetrics m;
  m.step = step;

  buf.idle.assign(n, 0);
  long double removed = 0.0L, injected = 0.0L;
  const double death_p = 1.0 - params.beta;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t key = agent_key(step, i);
    if (rng::uniform(seed, kStreamSurvive, key) < death_p) {
      removed += budgets[i];
      budgets[i] = params.psi.sample_from_unit(rng::uniform(seed, kStreamRegen, key));
      injected += budgets[i];
      buf.idle[i] = 1;
      ++m.deaths;
    }
  }
  m.wealth_removed = static_cast<double>(removed);
  m.wealth_injected = static_cast<double>(injected);

  buf.clients.clear();
  buf.servers.clear();
  for (int i = 0; i < n; ++i) {
    if (buf.idle[i]) continue;
    if (rng::uniform(seed, kStreamRole, agent_key(step, i)) < params.p_c)
      buf.clients.push_back(i);
    else
      buf.servers.push_back(i);
  }

  SeqRng match_rng(seed, kStreamMatch, static_cast<std::uint64_t>(step));
  shuffle_indices(buf.clients, match_rng);
  shuffle_indices(buf.servers, match_rng);
  m.matches = static_cast<long>(std::min(buf.clients.size(), buf.servers.size()));

  long double delta_sum = 0.0L;
  for (long j = 0; j < m.matches; ++j) {
    const int c = buf.clients[j];
    const int sv = buf.servers[j];
    const double bc = budgets[c];
    bool bid_k = policy.bids_k(bc);
    if (bid_k && policy.p_tie > 0.0 && !policy.tie_points.empty()) {
      // the paper's p_tie randomization applies only at exact indifference
      for (double tp : policy.tie_points)
        if (std::abs(bc - tp) <= 1e-12) {
          bid_k = rng::uniform(seed, kStreamTie, agent_key(step, c)) >= policy.p_tie;
          break;
        }
    }
    if (!bid_k) {
      ++m.bids_zero;
      continue;
    }
    const TradeOutcome out = settle_trade(bc, budgets[sv], params.k, params, model);
    budgets[c] += out.client_delta;
    budgets[sv] += out.server_delta;
    ++m.trades;
    delta_sum += out.client_delta;
    delta_sum += out.server_delta;
    const double repay = params.alpha * out.overdraft;
    if (model == LoanModel::kBank)
      m.bank_take += repay;
    else if (model == LoanModel::kPeerLoan)
      m.premium_paid += repay;
  }
  m.trade_delta_sum = static_cast<double>(delta_sum);
  m.empirical_z = m.matches > 0 ? static_cast<double>(m.bids_zero) / m.matches : 0.0;
  m.trade_ratio = m.matches > 0 ? static_cast<double>(m.trades) / m.matches : 0.0;

  long double total = 0.0L;
  for (double b : budgets) total += b;
  m.total_wealth = static_cast<double>(total);
  m.mean_budget = n > 0 ? m.total_wealth / n : 0.0;

  buf.scratch = budgets;
  m.q05 = quantile_of(buf.scratch, 0.05);
  m.q25 = quantile_of(buf.scratch, 0.25);
  m.q50 = quantile_of(buf.scratch, 0.50);
  m.q75 = quantile_of(buf.scratch, 0.75);
  m.q95 = quantile_of(buf.scratch, 0.95);
  return m;
}

}  // namespace

void SimConfig::validate() const {
  params.validate();
  validate_grid_for(grid, params);
  if (n_agents < 2) throw std::invalid_argument("sim.n_agents: must be >= 2");
  if (n_steps < 1) throw std::invalid_argument("sim.n_steps: must be >= 1");
  if (policy_refresh_period < 1)
    throw std::invalid_argument("sim.policy_refresh_period: must be >= 1");
  if (belief_window < 1) throw std::invalid_argument("sim.belief_window: must be >= 1");
  if (!(initial_belief >= 0.0 && initial_belief <= 1.0))
    throw std::invalid_argument("sim.initial_belief: must lie in [0,1]");
}

double empirical_belief(std::span<const EpochMetrics> window, double fallback) {
  if (window.empty()) throw std::invalid_argument("empirical_belief: window is empty");
  long matches = 0, zeros = 0;
  for (const auto& m : window) {
    matches += m.matches;
    zeros += m.bids_zero;
  }
  if (matches == 0) return fallback;
  return static_cast<double>(zeros) / static_cast<double>(matches);
}

EpochMetrics sim_step(std::vector<double>& budgets, int step, const ClientPolicy& policy,
                      const MarketParams& params, LoanModel model, std::uint64_t seed) {
  StepBuffers buf;
  return step_impl(buf, budgets, step, policy, params, model, seed);
}

SimResult run(const SimConfig& config) {
  config.validate();
  const MarketParams& p = config.params;

  SimResult result;
  result.series.reserve(config.n_steps);

  std::vector<double> budgets(config.n_agents);
  for (int i = 0; i < config.n_agents; ++i) {
    const double u = rng::uniform(config.seed, kStreamInit, i);
    if (config.initial_pi.has_value())
      budgets[i] =
          sample_pi(*config.initial_pi, u, rng::uniform(config.seed, kStreamInitJitter, i));
    else
      budgets[i] = p.psi.sample_from_unit(u);
  }

  double belief = config.initial_belief;
  double premium = config.frozen_premium;
  DpOptions dp_opts;
  dp_opts.tol = config.dp_tol;
  dp_opts.peer_premium = config.model == LoanModel::kPeerLoan ? premium : 0.0;

  ClientPolicy policy;
  ValueFunction v_warm;
  bool have_warm = false;
  if (config.frozen_policy.has_value()) {
    policy = *config.frozen_policy;
  } else {
    auto dp = value_iterate(Belief{belief}, p, config.model, config.grid, dp_opts);
    policy = extract_client_policy(dp.v, Belief{belief}, p, config.model, config.policy_opts);
    v_warm = std::move(dp.v);
    have_warm = true;
  }

  StepBuffers buf;
  for (int t = 0; t < config.n_steps; ++t) {
    EpochMetrics m = step_impl(buf, budgets, t, policy, p, config.model, config.seed);
    m.belief = belief;
    result.series.push_back(m);

    const bool refresh = !config.frozen_policy.has_value() &&
                         (t + 1) % config.policy_refresh_period == 0 &&
                         t + 1 < config.n_steps;
    if (refresh) {
      const int w = std::min(config.belief_window, t + 1);
      std::span<const EpochMetrics> window(result.series.data() + (t + 1 - w), w);
      belief = empirical_belief(window, belief);
      if (config.model == LoanModel::kPeerLoan) {
        long bid_k_count = 0;
        double repay = 0.0;
        for (const auto& wm : window) {
          bid_k_count += wm.trades;
          repay += wm.premium_paid;
        }
        if (bid_k_count > 0) premium = repay / bid_k_count;
        dp_opts.peer_premium = premium;
      }
      auto dp = value_iterate(Belief{belief}, p, config.model, config.grid, dp_opts,
                              have_warm ? &v_warm : nullptr);
      policy = extract_client_policy(dp.v, Belief{belief}, p, config.model,
                                     config.policy_opts);
      v_warm = std::move(dp.v);
      have_warm = true;
    }
  }

  // terminal statistics pooled over a trailing window
  SimSummary& sum = result.summary;
  sum.terminal_window = std::min(config.n_steps, std::max(config.belief_window, 100));
  {
    std::span<const EpochMetrics> tail(
        result.series.data() + (config.n_steps - sum.terminal_window),
        static_cast<std::size_t>(sum.terminal_window));
    long matches = 0, zeros = 0, trades = 0;
    for (const auto& m : tail) {
      matches += m.matches;
      zeros += m.bids_zero;
      trades += m.trades;
    }
    sum.terminal_z = matches > 0 ? static_cast<double>(zeros) / matches : 1.0;
    sum.terminal_trade_ratio = matches > 0 ? static_cast<double>(trades) / matches : 0.0;
  }
  {
    // batch-means standard error of the per-step bid-0 share
    const int span_len = std::min(config.n_steps, 1000);
    const int batch = 100;
    const int nb = span_len / batch;
    if (nb >= 2) {
      std::vector<double> means;
      for (int b = 0; b < nb; ++b) {
        long matches = 0, zeros = 0;
        for (int t = config.n_steps - span_len + b * batch;
             t < config.n_steps - span_len + (b + 1) * batch; ++t) {
          matches += result.series[t].matches;
          zeros += result.series[t].bids_zero;
        }
        means.push_back(matches > 0 ? static_cast<double>(zeros) / matches : 1.0);
      }
      double mu = std::accumulate(means.begin(), means.end(), 0.0) / nb;
      double var = 0.0;
      for (double x : means) var += (x - mu) * (x - mu);
      var /= (nb - 1);
      sum.terminal_z_se = std::sqrt(var / nb);
    } else {
      const auto& last = result.series.back();
      const double zz = sum.terminal_z;
      sum.terminal_z_se =
          last.matches > 0 ? std::sqrt(std::max(zz * (1.0 - zz), 1e-12) / last.matches) : 0.0;
    }
  }
  sum.final_belief = belief;
  sum.final_premium = premium;
  sum.mean_budget = result.series.back().mean_budget;
  for (const auto& m : result.series) {
    sum.total_trades += m.trades;
    sum.total_matches += m.matches;
  }
  result.final_budgets = std::move(budgets);
  return result;
}

// ----- coupled two-region simulation --------------------------------------

void CoupledSimConfig::validate() const {
  params.validate();
  grid.validate();
  if (n_per_region < 2) throw std::invalid_argument("case.n_per_region: must be >= 2");
  if (n_steps < 1) throw std::invalid_argument("case.n_steps: must be >= 1");
  double total = 0.0;
  for (double sp : state_probs) {
    if (sp < 0.0) throw std::invalid_argument("case.state_probs: must be >= 0");
    total += sp;
  }
  if (replay.empty() && std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("case.state_probs: must sum to 1");
}

int CoupledSimResult::first_step_below(double threshold, bool region_a) const {
  for (const auto& m : series) {
    const double belief = region_a ? m.belief_a : m.belief_b;
    if (belief < threshold) return m.step;
  }
  return -1;
}

double CoupledSimResult::belief_area(bool region_a) const {
  double area = 0.0;
  for (const auto& m : series) area += region_a ? m.belief_a : m.belief_b;
  return area;
}

CoupledSimResult run_coupled(const CoupledSimConfig& config) {
  config.validate();
  const int n = config.n_per_region;

  MarketParams pa = config.params;
  pa.p_c = config.region_a.p_c;
  pa.p_s = 1.0 - pa.p_c;
  pa.psi = config.region_a.psi;
  pa.validate();
  MarketParams pb = config.params;
  pb.p_c = config.region_b.p_c;
  pb.p_s = 1.0 - pb.p_c;
  pb.psi = config.region_b.psi;
  pb.validate();
  validate_grid_for(config.grid, pa);
  validate_grid_for(config.grid, pb);

  std::vector<double> budget_a(n), budget_b(n);
  for (int i = 0; i < n; ++i) {
    budget_a[i] = pa.psi.sample_from_unit(rng::uniform(config.seed, kStreamInit, agent_key(0, i)));
    budget_b[i] = pb.psi.sample_from_unit(
        rng::uniform(config.seed, kStreamInit, agent_key(1, i)));
  }

  // belief_x = probability that a region-x client bids 0; region A's policy
  // depends on belief_b through its server role, and vice versa
  double belief_a = config.initial_belief, belief_b = config.initial_belief;
  double premium_a = 0.0, premium_b = 0.0;

  DpOptions dp_a, dp_b;
  dp_a.tol = dp_b.tol = config.dp_tol;
  ValueFunction va, vb;
  auto refresh_policies = [&](bool warm) -> std::pair<ClientPolicy, ClientPolicy> {
    dp_a.peer_premium = config.model == LoanModel::kPeerLoan ? premium_a : 0.0;
    dp_b.peer_premium = config.model == LoanModel::kPeerLoan ? premium_b : 0.0;
    auto ra = value_iterate(Belief{belief_b}, pa, config.model, config.grid, dp_a,
                            warm ? &va : nullptr);
    auto rb = value_iterate(Belief{belief_a}, pb, config.model, config.grid, dp_b,
                            warm ? &vb : nullptr);
    va = std::move(ra.v);
    vb = std::move(rb.v);
    return {extract_client_policy(va, Belief{belief_b}, pa, config.model, config.policy_opts),
            extract_client_policy(vb, Belief{belief_a}, pb, config.model,
                                  config.policy_opts)};
  };
  auto [policy_a, policy_b] = refresh_policies(false);

  CoupledSimResult result;
  result.series.reserve(config.n_steps);

  struct WindowEntry {
    long matches_a = 0, zeros_a = 0, trades_a = 0;
    long matches_b = 0, zeros_b = 0, trades_b = 0;
    double repay_a = 0.0, repay_b = 0.0;  // overdraft repayments by client side
  };
  std::vector<WindowEntry> window(config.n_steps);

  std::vector<int> clients, servers;
  const double death_p = 1.0 - config.params.beta;

  for (int t = 0; t < config.n_steps; ++t) {
    CoupledEpochMetrics m;
    m.step = t;
    m.belief_a = belief_a;
    m.belief_b = belief_b;

    // survival and regeneration in both regions
    auto churn = [&](std::vector<double>& budgets, const MarketParams& pp, int region) {
      for (int i = 0; i < n; ++i) {
        const std::uint64_t key = agent_key(t, i) ^ (static_cast<std::uint64_t>(region) << 63);
        if (rng::uniform(config.seed, kStreamSurvive, key) < death_p)
          budgets[i] = pp.psi.sample_from_unit(rng::uniform(config.seed, kStreamRegen, key));
      }
    };
    churn(budget_a, pa, 0);
    churn(budget_b, pb, 1);

    // joint weather state
    HourState state;
    if (!config.replay.empty()) {
      state = config.replay[t % config.replay.size()];
    } else {
      const double u = rng::uniform(config.seed, kStreamWeather, t);
      if (u < config.state_probs[0])
        state = HourState::kIdleBothGood;
      else if (u < config.state_probs[0] + config.state_probs[1])
        state = HourState::kIdleBothBad;
      else if (u < config.state_probs[0] + config.state_probs[1] + config.state_probs[2])
        state = HourState::kClientA;
      else
        state = HourState::kClientB;
    }
    m.state = state;

    if (state == HourState::kClientA || state == HourState::kClientB) {
      const bool a_buys = state == HourState::kClientA;
      std::vector<double>& cb = a_buys ? budget_a : budget_b;
      std::vector<double>& sb = a_buys ? budget_b : budget_a;
      const ClientPolicy& cp = a_buys ? policy_a : policy_b;
      const MarketParams& cparams = a_buys ? pa : pb;

      clients.resize(n);
      servers.resize(n);
      std::iota(clients.begin(), clients.end(), 0);
      std::iota(servers.begin(), servers.end(), 0);
      SeqRng match_rng(config.seed, kStreamMatch, t);
      shuffle_indices(clients, match_rng);
      shuffle_indices(servers, match_rng);

      m.matches = n;
      WindowEntry& w = window[t];
      for (int j = 0; j < n; ++j) {
        const int c = clients[j];
        const int sv = servers[j];
        if (!cp.bids_k(cb[c])) {
          if (a_buys)
            ++w.zeros_a;
          else
            ++w.zeros_b;
          continue;
        }
        const TradeOutcome out = settle_trade(cb[c], sb[sv], cparams.k, cparams, config.model);
        cb[c] += out.client_delta;
        sb[sv] += out.server_delta;
        ++m.trades;
        const double repay = cparams.alpha * out.overdraft;
        if (a_buys) {
          ++w.trades_a;
          w.repay_a += repay;
        } else {
          ++w.trades_b;
          w.repay_b += repay;
        }
      }
      if (a_buys)
        w.matches_a = n;
      else
        w.matches_b = n;
      m.empirical_z = 1.0 - static_cast<double>(m.trades) / n;
      result.total_matches += n;
      result.total_trades += m.trades;
    }

    long double ta = 0.0L, tb = 0.0L;
    for (double b : budget_a) ta += b;
    for (double b : budget_b) tb += b;
    m.mean_budget_a = static_cast<double>(ta) / n;
    m.mean_budget_b = static_cast<double>(tb) / n;
    result.series.push_back(m);

    if ((t + 1) % config.policy_refresh_period == 0 && t + 1 < config.n_steps) {
      long ma = 0, za = 0, mb = 0, zb = 0, tra = 0, trb = 0;
      double rpa = 0.0, rpb = 0.0;
      for (int u = std::max(0, t + 1 - config.belief_window); u <= t; ++u) {
        ma += window[u].matches_a;
        za += window[u].zeros_a;
        tra += window[u].trades_a;
        rpa += window[u].repay_a;
        mb += window[u].matches_b;
        zb += window[u].zeros_b;
        trb += window[u].trades_b;
        rpb += window[u].repay_b;
      }
      if (ma > 0) belief_a = static_cast<double>(za) / ma;
      if (mb > 0) belief_b = static_cast<double>(zb) / mb;
      if (config.model == LoanModel::kPeerLoan) {
        // premium received by a region's servers comes from the opposing
        // region's borrowing clients
        if (trb > 0) premium_a = rpb / trb;
        if (tra > 0) premium_b = rpa / tra;
      }
      std::tie(policy_a, policy_b) = refresh_policies(true);
    }
  }

  result.joint_trade_ratio =
      result.total_matches > 0
          ? static_cast<double>(result.total_trades) / result.total_matches
          : 0.0;
  result.final_budgets_a = std::move(budget_a);
  result.final_budgets_b = std::move(budget_b);
  return result;
}

// ----- sweep harness -------------------------------------------------------

std::vector<SweepCellResult> sweep(const SweepRequest& request) {
  const std::size_t n_psi = request.psi_options.size();
  const std::size_t n_k = request.k_values.size();
  std::vector<SweepCellResult> rows(n_psi * n_k);
  if (rows.empty()) return rows;

  auto run_cell = [&](std::size_t cell) {
    const std::size_t pi = cell / n_k;
    const std::size_t ki = cell % n_k;
    SweepCellResult& row = rows[cell];
    row.k = request.k_values[ki];
    row.psi = request.psi_options[pi].describe();
    try {
      MarketParams params = request.base;
      params.k = row.k;
      params.psi = request.psi_options[pi];
      params.validate();
      row.flagged = !params.band_warnings().empty();
      if (request.mode == SweepMode::kSolve) {
        auto rep = solve_mfe(params, request.model, request.grid, request.solve);
        row.trade_ratio = rep.trade_ratio;
        row.expected_value = rep.expected_value;
        row.z_star = rep.z_star;
        row.residual = rep.residual;
        row.converged = rep.converged;
      } else {
        SimConfig sc = request.sim;
        sc.params = params;
        sc.model = request.model;
        sc.grid = request.grid;
        sc.seed = rng::hash(request.seed, 0xce11, cell);
        auto res = run(sc);
        row.trade_ratio = res.summary.terminal_trade_ratio;
        row.z_star = res.summary.terminal_z;
        row.converged = true;
        DpOptions dp_opts;
        dp_opts.tol = request.sim.dp_tol;
        if (request.model == LoanModel::kPeerLoan)
          dp_opts.peer_premium = res.summary.final_premium;
        auto dp = value_iterate(Belief{res.summary.terminal_z}, params, request.model,
                                request.grid, dp_opts);
        row.expected_value = expected_value(dp.v, params.psi);
        row.residual = 0.0;
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  };

  const int workers = std::max(1, request.workers);
  if (workers == 1 || rows.size() == 1) {
    for (std::size_t cell = 0; cell < rows.size(); ++cell) run_cell(cell);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int count = static_cast<int>(
        std::min(static_cast<std::size_t>(workers), rows.size()));
    pool.reserve(count);
    for (int w = 0; w < count; ++w)
      pool.emplace_back([&] {
        for (std::size_t cell = next.fetch_add(1); cell < rows.size();
             cell = next.fetch_add(1))
          run_cell(cell);
      });
    for (auto& th : pool) th.join();
  }
  return rows;
}

}  // namespace a2amkt
