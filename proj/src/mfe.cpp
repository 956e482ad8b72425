#include "a2amkt/mfe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace a2amkt {

void BudgetKernel::push_forward(const std::vector<double>& x, std::vector<double>& y) const {
  const int n = grid.n();
  y.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double w = beta * xi;
    for (int e = row_ptr[i]; e < row_ptr[i + 1]; ++e) y[col[e]] += w * prob[e];
  }
  double total = 0.0;
  for (double xi : x) total += xi;
  const double r = (1.0 - beta) * total;
  for (int j = 0; j < n; ++j) y[j] += r * regen[j];
}

double BudgetKernel::row_sum(int i) const {
  double s = 0.0;
  for (int e = row_ptr[i]; e < row_ptr[i + 1]; ++e) s += prob[e];
  double rg = 0.0;
  for (double m : regen) rg += m;
  return beta * s + (1.0 - beta) * rg;
}

double StationaryDistribution::total() const {
  double t = 0.0;
  for (double m : mass) t += m;
  return t;
}

double StationaryDistribution::mass_below(double b) const {
  double t = 0.0;
  const int n = grid.n();
  for (int i = 0; i < n && grid.budget(i) < b; ++i) t += mass[i];
  return t;
}

double StationaryDistribution::quantile(double q) const {
  double acc = 0.0;
  const int n = grid.n();
  for (int i = 0; i < n; ++i) {
    acc += mass[i];
    if (acc >= q) return grid.budget(i);
  }
  return grid.b_max;
}

std::vector<double> bid_zero_fractions(const ClientPolicy& policy, const GridSpec& grid) {
  const int n = grid.n();
  std::vector<double> frac(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double lo = grid.cell_lo(i);
    const double hi = grid.cell_hi(i);
    const double w = hi - lo;
    frac[i] = w > 0.0 ? policy.bid_zero_measure(lo, hi) / w
                      : (policy.bids_k(grid.budget(i)) ? 0.0 : 1.0);
  }
  return frac;
}

namespace {

struct RowAccum {
  std::vector<int> idx;
  std::vector<double> val;

  void add(GridSpec::Lookup lk, double p) {
    if (p <= 0.0) return;
    push(lk.idx, p * (1.0 - lk.frac));
    if (lk.frac > 0.0) push(lk.idx + 1, p * lk.frac);
  }
  void push(int j, double p) {
    if (p <= 0.0) return;
    for (std::size_t e = 0; e < idx.size(); ++e) {
      if (idx[e] == j) {
        val[e] += p;
        return;
      }
    }
    idx.push_back(j);
    val.push_back(p);
  }
  void clear() {
    idx.clear();
    val.clear();
  }
};

}  // namespace

double PremiumDistribution::mean() const {
  double m = 0.0;
  for (std::size_t t = 0; t < repay.size(); ++t) m += repay[t] * weight[t];
  return m;
}

PremiumDistribution PremiumDistribution::constant(double value) {
  return {{value}, {1.0}};
}

PremiumDistribution PremiumDistribution::from_population(
    const StationaryDistribution& pi, const std::vector<double>& bid_zero_fraction,
    const MarketParams& params) {
  PremiumDistribution dist;
  double zero_w = 0.0, total = 0.0;
  const int n = pi.grid.n();
  for (int i = 0; i < n; ++i) {
    const double w = pi.mass[i] * (1.0 - bid_zero_fraction[i]);
    if (w <= 1e-15) continue;
    total += w;
    const double repay = params.alpha * std::max(0.0, params.k - pi.grid.budget(i));
    if (repay <= 0.0) {
      zero_w += w;
      continue;
    }
    dist.repay.push_back(repay);
    dist.weight.push_back(w);
  }
  if (total <= 0.0) return constant(0.0);
  // borrowing cells sit below k, so budgets descend as repayments ascend
  std::reverse(dist.repay.begin(), dist.repay.end());
  std::reverse(dist.weight.begin(), dist.weight.end());
  if (zero_w > 0.0) {
    dist.repay.insert(dist.repay.begin(), 0.0);
    dist.weight.insert(dist.weight.begin(), zero_w);
  }
  for (double& w : dist.weight) w /= total;
  return dist;
}

namespace {

BudgetKernel build_kernel(Belief belief, const ClientPolicy& policy,
                          const MarketParams& params, LoanModel model, const GridSpec& grid,
                          const PremiumDistribution& premium) {
  const double z = belief.z;
  if (!(z >= 0.0 && z <= 1.0))
    throw std::invalid_argument("budget_kernel: z must lie in [0,1]");
  const int n = grid.n();

  BudgetKernel kernel;
  kernel.grid = grid;
  kernel.beta = params.beta;
  kernel.regen = discretize(params.psi, grid);
  kernel.row_ptr.assign(n + 1, 0);

  const auto q = bid_zero_fractions(policy, grid);
  const double lower = bid_feasibility_threshold(params, model);
  const double serve_gain = params.k - params.c_serve;

  RowAccum row;
  for (int i = 0; i < n; ++i) {
    row.clear();
    const double b = grid.budget(i);

    // stay put: servers whose client declines, plus own bid-0 client periods
    row.push(i, params.p_s * z + params.p_c * q[i]);

    // own successful client trade
    const double p_trade = params.p_c * (1.0 - q[i]);
    if (p_trade > 0.0) {
      // boundary cells straddle the feasibility threshold; the trading part
      // of the cell starts at the threshold
      const double b_eff = std::max(b, lower);
      const double od = model == LoanModel::kHard ? 0.0 : std::max(0.0, params.k - b_eff);
      const double dest = b_eff + params.s - params.k - params.alpha * od;
      if (dest < -1e-9)
        throw std::logic_error("budget_kernel: client destination below zero (bid-cap bug)");
      row.add(grid.locate(std::max(0.0, dest)), p_trade);
    }

    // served trade, jump spread over the incoming repayment distribution
    const double p_serve = params.p_s * (1.0 - z);
    for (std::size_t t = 0; t < premium.repay.size(); ++t) {
      const double dest_s = b + serve_gain + premium.repay[t];
      if (dest_s < -1e-9)
        throw std::logic_error("budget_kernel: server destination below zero (k < c_serve)");
      row.add(grid.locate(std::max(0.0, dest_s)), p_serve * premium.weight[t]);
    }

    for (std::size_t e = 0; e < row.idx.size(); ++e) {
      kernel.col.push_back(row.idx[e]);
      kernel.prob.push_back(row.val[e]);
    }
    kernel.row_ptr[i + 1] = static_cast<int>(kernel.col.size());
  }
  return kernel;
}

}  // namespace

BudgetKernel budget_kernel(Belief belief, const ClientPolicy& policy,
                           const MarketParams& params, LoanModel model, const GridSpec& grid,
                           double peer_premium) {
  const double value = model == LoanModel::kPeerLoan ? peer_premium : 0.0;
  return build_kernel(belief, policy, params, model, grid,
                      PremiumDistribution::constant(value));
}

BudgetKernel budget_kernel(Belief belief, const ClientPolicy& policy,
                           const MarketParams& params, LoanModel model, const GridSpec& grid,
                           const PremiumDistribution& premium) {
  if (model != LoanModel::kPeerLoan)
    return build_kernel(belief, policy, params, model, grid,
                        PremiumDistribution::constant(0.0));
  return build_kernel(belief, policy, params, model, grid, premium);
}

StationaryDistribution stationary_distribution(const BudgetKernel& kernel, double tol,
                                               long max_iters,
                                               const StationaryDistribution* warm) {
  const int n = kernel.grid.n();
  StationaryDistribution pi;
  pi.grid = kernel.grid;
  if (warm != nullptr && warm->grid == kernel.grid &&
      static_cast<int>(warm->mass.size()) == n)
    pi.mass = warm->mass;
  else
    pi.mass = kernel.regen;

  std::vector<double> next(n, 0.0);
  for (long iter = 0; iter < max_iters; ++iter) {
    kernel.push_forward(pi.mass, next);
    double diff = 0.0, total = 0.0;
    for (int j = 0; j < n; ++j) {
      diff += std::abs(next[j] - pi.mass[j]);
      total += next[j];
    }
    for (int j = 0; j < n; ++j) next[j] /= total;  // keep roundoff drift out
    pi.mass.swap(next);
    if (diff <= tol) return pi;
  }
  throw std::runtime_error("stationary_distribution: power iteration did not converge");
}

GammaEval eval_gamma(Belief belief, const MarketParams& params, LoanModel model,
                     const GridSpec& grid, const SolveOptions& opts, MfeWorkspace* ws) {
  GammaEval ev;
  DpOptions dp_opts;
  dp_opts.tol = opts.dp_tol;
  dp_opts.premium_in_reward = opts.premium_in_reward;
  double premium = (ws != nullptr && ws->warm) ? ws->peer_premium : 0.0;
  if (model != LoanModel::kPeerLoan) premium = 0.0;
  PremiumDistribution premium_dist = PremiumDistribution::constant(premium);

  const ValueFunction* warm_v = (ws != nullptr && ws->warm) ? &ws->v : nullptr;
  const StationaryDistribution* warm_pi = (ws != nullptr && ws->warm) ? &ws->pi : nullptr;

  for (int round = 0; round < 80; ++round) {
    // the DP sees the mean repayment; the kernel carries the full spread
    dp_opts.peer_premium = premium;
    ev.dp = value_iterate(belief, params, model, grid, dp_opts, warm_v);
    ev.policy = extract_client_policy(ev.dp.v, belief, params, model, opts.policy);
    const auto kernel = budget_kernel(belief, ev.policy, params, model, grid, premium_dist);
    ev.pi = stationary_distribution(kernel, opts.pi_tol, 2000000, warm_pi);
    warm_v = &ev.dp.v;
    warm_pi = &ev.pi;

    if (model != LoanModel::kPeerLoan) break;
    const auto q = bid_zero_fractions(ev.policy, grid);
    premium_dist = PremiumDistribution::from_population(ev.pi, q, params);
    const double next = premium_dist.mean();
    if (std::abs(next - premium) <= opts.premium_tol && round > 0) {
      premium = next;
      break;
    }
    premium = next;
  }

  ev.peer_premium = premium;
  const auto q = bid_zero_fractions(ev.policy, grid);
  double gamma = 0.0;
  for (int i = 0; i < grid.n(); ++i) gamma += ev.pi.mass[i] * q[i];
  ev.gamma = std::min(1.0, std::max(0.0, gamma));

  if (ws != nullptr) {
    ws->v = ev.dp.v;
    ws->pi = ev.pi;
    ws->peer_premium = premium;
    ws->warm = true;
  }
  return ev;
}

namespace {

FixedPointReport finish_report(FixedPointReport rep, GammaEval&& ev,
                               const MarketParams& params) {
  rep.trade_ratio = 1.0 - rep.z_star;
  rep.peer_premium = ev.peer_premium;
  rep.policy = std::move(ev.policy);
  rep.value = std::move(ev.dp.v);
  rep.pi = std::move(ev.pi);
  rep.expected_value = expected_value(rep.value, params.psi);
  return rep;
}

}  // namespace

FixedPointReport solve_mfe(const MarketParams& params, LoanModel model, const GridSpec& grid,
                           const SolveOptions& opts) {
  params.validate();
  validate_grid_for(grid, params);
  if (!(opts.z0 >= 0.0 && opts.z0 <= 1.0))
    throw std::invalid_argument("solve_mfe: z0 must lie in [0,1]");
  if (!(opts.damping > 0.0 && opts.damping <= 1.0))
    throw std::invalid_argument("solve_mfe: damping must lie in (0,1]");

  MfeWorkspace ws;
  FixedPointReport rep;
  double z = opts.z0;

  // bracket for gamma(z)-z sign changes, used by the bisection fallback
  double pos_z = -1.0, neg_z = 2.0;  // largest z with g>0, smallest with g<0
  bool bisecting = false;
  double stall_ref = std::numeric_limits<double>::infinity();

  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    GammaEval ev = eval_gamma(Belief{z}, params, model, grid, opts, &ws);
    const double f = ev.gamma - z;
    rep.trace.emplace_back(z, ev.gamma);
    rep.iterations = iter;
    rep.z_star = z;
    rep.residual = std::abs(f);

    if (rep.residual <= opts.tol) {
      rep.converged = true;
      return finish_report(std::move(rep), std::move(ev), params);
    }

    if (f > 0.0 && z < neg_z) pos_z = std::max(pos_z, z);
    if (f < 0.0 && z > pos_z) neg_z = std::min(neg_z, z);
    const bool have_bracket = pos_z >= 0.0 && neg_z <= 1.0 && pos_z < neg_z;

    if (!bisecting && iter % 8 == 0) {
      // damped iteration should shrink the residual geometrically; if it
      // stopped improving, fall back to bisection on the bracket
      if (rep.residual > 0.5 * stall_ref && have_bracket) bisecting = true;
      stall_ref = rep.residual;
    }

    if (bisecting && have_bracket)
      z = 0.5 * (pos_z + neg_z);
    else
      z = std::clamp((1.0 - opts.damping) * z + opts.damping * ev.gamma, 0.0, 1.0);

    if (have_bracket && neg_z - pos_z < 1e-13) {
      // the fixed point sits on a jump of the discretized gamma; report the
      // nearest point reached
      rep.converged = rep.residual <= opts.tol;
      return finish_report(std::move(rep), std::move(ev), params);
    }
  }

  GammaEval ev = eval_gamma(Belief{z}, params, model, grid, opts, &ws);
  rep.trace.emplace_back(z, ev.gamma);
  rep.z_star = z;
  rep.residual = std::abs(ev.gamma - z);
  rep.converged = rep.residual <= opts.tol;
  return finish_report(std::move(rep), std::move(ev), params);
}

std::vector<FixedPointReport> solve_mfe_multistart(const MarketParams& params, LoanModel model,
                                                   const GridSpec& grid,
                                                   const SolveOptions& opts,
                                                   const std::vector<double>& starts) {
  std::vector<FixedPointReport> found;
  for (double z0 : starts) {
    SolveOptions o = opts;
    o.z0 = z0;
    auto rep = solve_mfe(params, model, grid, o);
    bool fresh = true;
    for (const auto& r : found)
      if (std::abs(r.z_star - rep.z_star) <= 10.0 * opts.tol) fresh = false;
    if (fresh) found.push_back(std::move(rep));
  }
  return found;
}

CoupledReport solve_coupled_mfe(const TypeProfile& type_a, const TypeProfile& type_b,
                                const MarketParams& base, LoanModel model,
                                const GridSpec& grid, const SolveOptions& opts) {
  auto params_for = [&](const TypeProfile& t) {
    MarketParams p = base;
    p.p_c = t.p_c;
    p.p_s = t.p_s;
    p.psi = t.psi;
    p.validate();
    return p;
  };
  const MarketParams pa = params_for(type_a);
  const MarketParams pb = params_for(type_b);
  validate_grid_for(grid, pa);
  validate_grid_for(grid, pb);
  if (opts.max_iters < 1)
    throw std::invalid_argument("solve_coupled_mfe: max_iters must be >= 1");

  CoupledReport rep;
  MfeWorkspace wsa, wsb;
  double za = opts.z0, zb = opts.z0;
  double ra = 1.0, rb = 1.0;
  GammaEval eva, evb;

  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    rep.iterations = iter;
    // type A best-responds to type B's clients and vice versa
    eva = eval_gamma(Belief{zb}, pa, model, grid, opts, &wsa);
    ra = std::abs(eva.gamma - za);
    za = std::clamp((1.0 - opts.damping) * za + opts.damping * eva.gamma, 0.0, 1.0);

    evb = eval_gamma(Belief{za}, pb, model, grid, opts, &wsb);
    rb = std::abs(evb.gamma - zb);
    zb = std::clamp((1.0 - opts.damping) * zb + opts.damping * evb.gamma, 0.0, 1.0);

    rep.a.trace.emplace_back(za, eva.gamma);
    rep.b.trace.emplace_back(zb, evb.gamma);
    if (ra <= opts.tol && rb <= opts.tol) {
      rep.converged = true;
      break;
    }
  }

  rep.a.z_star = za;
  rep.a.residual = ra;
  rep.a.iterations = rep.iterations;
  rep.a.converged = ra <= opts.tol;
  rep.a = finish_report(std::move(rep.a), std::move(eva), pa);

  rep.b.z_star = zb;
  rep.b.residual = rb;
  rep.b.iterations = rep.iterations;
  rep.b.converged = rb <= opts.tol;
  rep.b = finish_report(std::move(rep.b), std::move(evb), pb);

  // matches are cross-type, so the per-match trade probability averages the
  // two client pools by their share of matches
  rep.joint_trade_ratio =
      (pa.p_c * (1.0 - za) + pb.p_c * (1.0 - zb)) / (pa.p_c + pb.p_c);
  return rep;
}

}  // namespace a2amkt
