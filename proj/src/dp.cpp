#include "a2amkt/dp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace a2amkt {

namespace {

inline double interp(const std::vector<double>& v, GridSpec::Lookup lk) {
  if (lk.frac == 0.0) return v[lk.idx];
  return (1.0 - lk.frac) * v[lk.idx] + lk.frac * v[lk.idx + 1];
}

// Destination lookups and per-stage rewards are invariant across sweeps, so
// they are computed once per solve.
struct BellmanTables {
  int n = 0;
  double beta = 0.0, p_c = 0.0, p_s = 0.0, c_lose = 0.0;
  double serve_reward = 0.0;   // instantaneous gain per served trade
  double client_reward = 0.0;  // s - k
  std::vector<GridSpec::Lookup> dest_serve;
  std::vector<GridSpec::Lookup> dest_client;
  std::vector<char> feasible;
};

BellmanTables make_tables(const GridSpec& grid, const MarketParams& p, LoanModel model,
                          const DpOptions& opts) {
  BellmanTables t;
  t.n = grid.n();
  t.beta = p.beta;
  t.p_c = p.p_c;
  t.p_s = p.p_s;
  t.c_lose = p.c_lose;
  t.client_reward = p.s - p.k;

  const double premium = model == LoanModel::kPeerLoan ? opts.peer_premium : 0.0;
  const double serve_jump = p.k - p.c_serve + premium;
  t.serve_reward = p.k - p.c_serve + (opts.premium_in_reward ? premium : 0.0);

  const double lower = bid_feasibility_threshold(p, model);
  t.dest_serve.resize(t.n);
  t.dest_client.resize(t.n);
  t.feasible.resize(t.n);
  for (int i = 0; i < t.n; ++i) {
    const double b = grid.budget(i);
    t.dest_serve[i] = grid.locate(std::max(0.0, b + serve_jump));
    t.feasible[i] = b >= lower - 1e-12;
    const double od = model == LoanModel::kHard ? 0.0 : std::max(0.0, p.k - b);
    t.dest_client[i] = grid.locate(std::max(0.0, b + p.s - p.k - p.alpha * od));
  }
  return t;
}

// One sweep of T_z; returns the sup-norm residual.
double apply_once(const BellmanTables& t, double z, const std::vector<double>& in,
                  std::vector<double>& out) {
  const double ps_trade = t.p_s * (1.0 - z);
  double resid = 0.0;
  for (int i = 0; i < t.n; ++i) {
    const double vi = in[i];
    double val = t.beta * vi +
                 ps_trade * (t.serve_reward + t.beta * (interp(in, t.dest_serve[i]) - vi));
    double client = -t.c_lose;
    if (t.feasible[i]) {
      const double win =
          t.client_reward + t.beta * (interp(in, t.dest_client[i]) - vi);
      client = std::max(client, win);
    }
    val += t.p_c * client;
    resid = std::max(resid, std::abs(val - vi));
    out[i] = val;
  }
  return resid;
}

}  // namespace

bool ClientPolicy::bids_k(double b) const {
  if (std::binary_search(switch_points.begin(), switch_points.end(), b))
    return true;  // exact ties are pro-trade (p_tie randomization is the caller's job)
  const auto it = std::upper_bound(switch_points.begin(), switch_points.end(), b);
  const std::size_t flips = static_cast<std::size_t>(it - switch_points.begin());
  const bool is_zero = first_bids_zero == ((flips & 1u) == 0u);
  return !is_zero;
}

double ClientPolicy::bid_zero_measure(double lo, double hi) const {
  if (hi <= lo) return 0.0;
  double measure = 0.0;
  double a = lo;
  auto it = std::upper_bound(switch_points.begin(), switch_points.end(), lo);
  std::size_t flips = static_cast<std::size_t>(it - switch_points.begin());
  bool is_zero = first_bids_zero == ((flips & 1u) == 0u);
  for (; it != switch_points.end() && *it < hi; ++it) {
    if (is_zero) measure += *it - a;
    a = *it;
    is_zero = !is_zero;
  }
  if (is_zero) measure += hi - a;
  return measure;
}

int ClientPolicy::piece_count(double lo, double hi) const {
  int inside = 0;
  for (double sp : switch_points)
    if (sp > lo && sp < hi) ++inside;
  return inside + 1;
}

double bid_feasibility_threshold(const MarketParams& params, LoanModel model) {
  if (model == LoanModel::kHard) return params.k;
  return params.k - params.s / (1.0 + params.alpha);
}

double always_bid_threshold(const MarketParams& params) {
  return params.k - (params.s - params.k) / params.alpha;
}

ValueFunction bellman_apply(const ValueFunction& v, Belief belief, const MarketParams& params,
                            LoanModel model, const DpOptions& opts) {
  if (!v.all_finite()) throw std::invalid_argument("bellman_apply: input not finite");
  if (!(belief.z >= 0.0 && belief.z <= 1.0))
    throw std::invalid_argument("bellman_apply: z must lie in [0,1]");
  const auto tables = make_tables(v.grid, params, model, opts);
  ValueFunction out{v.grid, std::vector<double>(tables.n, 0.0)};
  apply_once(tables, belief.z, v.values, out.values);
  return out;
}

DpResult value_iterate(Belief belief, const MarketParams& params, LoanModel model,
                       const GridSpec& grid, const DpOptions& opts,
                       const ValueFunction* warm) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("value_iterate: tol must be > 0");
  const auto tables = make_tables(grid, params, model, opts);
  DpResult res;
  res.v.grid = grid;
  if (warm != nullptr && warm->grid == grid && warm->all_finite())
    res.v.values = warm->values;
  else
    res.v.values.assign(tables.n, 0.0);

  std::vector<double> next(tables.n, 0.0);
  for (long iter = 1; iter <= opts.max_iters; ++iter) {
    const double resid = apply_once(tables, belief.z, res.v.values, next);
    res.v.values.swap(next);
    res.iterations = iter;
    res.residual = resid;
    if (resid <= opts.tol) return res;
  }
  throw std::runtime_error("value_iterate: no convergence within max_iters (residual " +
                           std::to_string(res.residual) + ")");
}

namespace {

// g(b) = v_c_win(b) - v_c_lose(b); bidding k is optimal where g >= 0.
struct WinLoseGap {
  const ValueFunction& v;
  double k, s, alpha, beta, c_lose;
  bool hard;

  double jump(double b) const {
    const double od = hard ? 0.0 : std::max(0.0, k - b);
    return std::max(0.0, b + s - k - alpha * od);
  }
  double operator()(double b) const {
    return beta * (v.at(jump(b)) - v.at(b)) + (s - k + c_lose);
  }
};

struct PieceBuilder {
  bool have_first = false;
  bool first_zero = true;
  bool current_zero = true;
  std::vector<double> switches;

  void append(bool is_zero, double from) {
    if (!have_first) {
      have_first = true;
      first_zero = current_zero = is_zero;
      return;
    }
    if (is_zero != current_zero) {
      switches.push_back(from);
      current_zero = is_zero;
    }
  }
};

}  // namespace

ClientPolicy extract_client_policy(const ValueFunction& v, Belief belief,
                                   const MarketParams& params, LoanModel model,
                                   const PolicyOptions& opts) {
  (void)belief;  // the client side of the DP depends on z only through v
  ClientPolicy policy;
  policy.k = params.k;
  policy.p_tie = opts.p_tie;

  const double lower = bid_feasibility_threshold(params, model);
  const double upper = always_bid_threshold(params);
  const bool in_band = params.s - params.k + params.c_lose >= -1e-12;
  const double tie_tol = opts.tie_tol_scale * (1.0 + v.sup_norm());

  WinLoseGap gap{v, params.k, params.s, params.alpha, params.beta, params.c_lose,
                 model == LoanModel::kHard};

  PieceBuilder pieces;
  if (lower > 0.0) pieces.append(true, 0.0);

  const double scan_lo = std::max(0.0, lower);
  const double scan_hi = in_band ? std::min(upper, v.grid.b_max) : v.grid.b_max;

  if (scan_hi > scan_lo) {
    const double step = v.grid.delta / 8.0;
    double prev_b = scan_lo;
    double prev_g = gap(prev_b);
    pieces.append(prev_g < 0.0, scan_lo);
    if (std::abs(prev_g) <= tie_tol) policy.tie_points.push_back(prev_b);
    for (double b = scan_lo + step; b < scan_hi + step; b += step) {
      const double bb = std::min(b, scan_hi);
      const double g = gap(bb);
      if ((g < 0.0) != (prev_g < 0.0)) {
        // refine the crossing; g is continuous and piecewise linear
        double lo_b = prev_b, hi_b = bb, lo_g = prev_g;
        for (int it = 0; it < 80 && hi_b - lo_b > 1e-12; ++it) {
          const double mid = 0.5 * (lo_b + hi_b);
          const double gm = gap(mid);
          if ((gm < 0.0) == (lo_g < 0.0)) {
            lo_b = mid;
            lo_g = gm;
          } else {
            hi_b = mid;
          }
        }
        const double root = 0.5 * (lo_b + hi_b);
        pieces.append(g < 0.0, root);
        policy.tie_points.push_back(root);
      }
      prev_b = bb;
      prev_g = g;
      if (bb >= scan_hi) break;
    }
  } else if (scan_hi <= scan_lo && lower > 0.0 && !in_band) {
    // degenerate: nothing to scan, keep the bid-0 prefix
  }

  if (in_band) pieces.append(false, std::max(scan_lo, std::min(upper, scan_hi)));
  if (!pieces.have_first) pieces.append(false, 0.0);  // cheap resource: k always affordable

  policy.first_bids_zero = pieces.first_zero;
  policy.switch_points = std::move(pieces.switches);
  std::sort(policy.tie_points.begin(), policy.tie_points.end());
  return policy;
}

ServerBidCheck server_best_response_check(const ValueFunction& v, Belief belief,
                                          const MarketParams& params, const DpOptions& opts) {
  ServerBidCheck check;
  const double z = belief.z;
  check.all_tied = z >= 1.0;
  const double tol = 1e-12 * (1.0 + v.sup_norm());
  const double premium = opts.premium_in_reward ? opts.peer_premium : 0.0;
  const int n = v.grid.n();
  for (int i = 0; i < n; ++i) {
    const double b = v.grid.budget(i);
    const double stay = z * params.beta * v.at(b);
    const double ask_k = (1.0 - z) * (params.beta * v.at(b + params.k - params.c_serve +
                                                         opts.peer_premium) +
                                      params.k - params.c_serve + premium) +
                         stay;
    const double ask_0 =
        (1.0 - z) * (params.beta * v.at(std::max(0.0, b - params.c_serve)) - params.c_serve) +
        stay;
    if (ask_0 > ask_k + tol) {
      check.all_prefer_k = false;
      check.violating_budgets.push_back(b);
    }
  }
  return check;
}

double server_bid_upper_bound(const MarketParams& params) {
  const double shift = params.s / (1.0 + params.alpha) + params.psi.upper_bound();
  const double log_beta = std::log(params.beta);
  const auto f = [&](double x) { return x * std::exp((x - shift) * log_beta); };

  const double peak = -1.0 / log_beta;
  const double top = f(peak);
  if (top < params.c_serve - 1e-15)
    throw std::runtime_error(
        "server_bid_upper_bound: no effective bound, peak expected return " +
        std::to_string(top) + " < c_serve");

  double lo = peak, hi = peak;
  do {
    hi *= 2.0;
    if (hi > 1e12)
      throw std::logic_error("server_bid_upper_bound: failed to bracket the root");
  } while (f(hi) >= params.c_serve);

  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) >= params.c_serve)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double expected_value(const ValueFunction& v, const RegenerationDistribution& psi) {
  const double b_max = v.grid.b_max;
  if (psi.upper_bound() > b_max + 1e-9)
    throw std::invalid_argument("expected_value: psi support exceeds grid b_max");

  switch (psi.kind()) {
    case RegenerationDistribution::Kind::kPoint:
      return v.at(psi.uniform_lo());
    case RegenerationDistribution::Kind::kTabulated: {
      double acc = 0.0;
      for (std::size_t j = 0; j < psi.atoms().size(); ++j)
        acc += psi.weights()[j] * v.at(psi.atoms()[j]);
      return acc;
    }
    case RegenerationDistribution::Kind::kUniform: {
      const double lo = psi.uniform_lo(), hi = psi.uniform_hi();
      if (hi == lo) return v.at(lo);
      // exact integral of the piecewise-linear interpolant
      double acc = 0.0;
      double a = lo, va = v.at(lo);
      const int first = static_cast<int>(std::floor(lo / v.grid.delta)) + 1;
      for (int i = first; i * v.grid.delta < hi; ++i) {
        const double x = i * v.grid.delta;
        const double vx = v.at(x);
        acc += 0.5 * (va + vx) * (x - a);
        a = x;
        va = vx;
      }
      const double vb = v.at(hi);
      acc += 0.5 * (va + vb) * (hi - a);
      return acc / (hi - lo);
    }
  }
  return 0.0;
}

}  // namespace a2amkt
