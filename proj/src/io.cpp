#include "a2amkt/io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace a2amkt {

using nlohmann::json;

const char* to_string(RunMode mode) {
  switch (mode) {
    case RunMode::kSolve: return "solve";
    case RunMode::kSimulate: return "simulate";
    case RunMode::kSweep: return "sweep";
    case RunMode::kCaseStudy: return "case-study";
    case RunMode::kCheck: return "check";
  }
  return "?";
}

RunMode run_mode_from_string(const std::string& name) {
  if (name == "solve") return RunMode::kSolve;
  if (name == "simulate") return RunMode::kSimulate;
  if (name == "sweep") return RunMode::kSweep;
  if (name == "case-study") return RunMode::kCaseStudy;
  if (name == "check") return RunMode::kCheck;
  throw std::invalid_argument("mode: unknown value '" + name + "'");
}

void RunConfig::validate() const {
  params.validate();
  grid.validate();
  if (mode == RunMode::kSolve || mode == RunMode::kSimulate || mode == RunMode::kSweep)
    validate_grid_for(grid, params);
  if (!(solve.damping > 0.0 && solve.damping <= 1.0))
    throw std::invalid_argument("solve.damping: must lie in (0,1]");
  if (!(solve.z0 >= 0.0 && solve.z0 <= 1.0))
    throw std::invalid_argument("solve.z0: must lie in [0,1]");
  if (!(solve.tol > 0.0)) throw std::invalid_argument("solve.tol: must be > 0");
  if (agents < 2) throw std::invalid_argument("sim.agents: must be >= 2");
  if (steps < 1) throw std::invalid_argument("sim.steps: must be >= 1");
  if (policy_refresh_period < 1)
    throw std::invalid_argument("sim.policy_refresh_period: must be >= 1");
  if (belief_window < 1) throw std::invalid_argument("sim.belief_window: must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers: must be >= 1");
  if (mode == RunMode::kSweep) {
    if (sweep_k.empty()) throw std::invalid_argument("sweep.k: empty");
    if (sweep_psi.empty()) throw std::invalid_argument("sweep.psi: empty");
  }
  if (mode == RunMode::kCaseStudy && !case_trace.has_value()) case_probs.validate();
  if (all_models && mode != RunMode::kSimulate)
    throw std::invalid_argument("model: 'all' is only valid for simulate");
}

RegenerationDistribution parse_psi(const std::string& text) {
  auto fail = [&] {
    throw std::invalid_argument("psi: cannot parse '" + text +
                                "' (expected U[lo,hi], point[v] or tab[b:w,...])");
  };
  if (text.size() >= 4 && (text[0] == 'U' || text[0] == 'u') && text[1] == '[' &&
      text.back() == ']') {
    double lo = 0, hi = 0;
    if (std::sscanf(text.c_str() + 1, "[%lf,%lf]", &lo, &hi) != 2) fail();
    return RegenerationDistribution::uniform(lo, hi);
  }
  if (text.rfind("point[", 0) == 0 && text.back() == ']') {
    double v = 0;
    if (std::sscanf(text.c_str() + 5, "[%lf]", &v) != 1) fail();
    return RegenerationDistribution::point(v);
  }
  if (text.rfind("tab[", 0) == 0 && text.back() == ']') {
    std::vector<double> atoms, weights;
    std::stringstream ss(text.substr(4, text.size() - 5));
    std::string item;
    while (std::getline(ss, item, ',')) {
      double b = 0, w = 0;
      if (std::sscanf(item.c_str(), "%lf:%lf", &b, &w) != 2) fail();
      atoms.push_back(b);
      weights.push_back(w);
    }
    if (atoms.empty()) fail();
    return RegenerationDistribution::tabulated(atoms, weights);
  }
  fail();
  return {};
}

std::string format_psi(const RegenerationDistribution& psi) {
  switch (psi.kind()) {
    case RegenerationDistribution::Kind::kUniform: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "U[%s,%s]", fmt_double(psi.uniform_lo()).c_str(),
                    fmt_double(psi.uniform_hi()).c_str());
      return buf;
    }
    case RegenerationDistribution::Kind::kPoint:
      return "point[" + fmt_double(psi.uniform_lo()) + "]";
    case RegenerationDistribution::Kind::kTabulated: {
      std::string out = "tab[";
      for (std::size_t i = 0; i < psi.atoms().size(); ++i) {
        if (i) out += ",";
        out += fmt_double(psi.atoms()[i]) + ":" + fmt_double(psi.weights()[i]);
      }
      return out + "]";
    }
  }
  return "?";
}

std::vector<RegenerationDistribution> parse_psi_list(const std::string& text) {
  std::vector<RegenerationDistribution> out;
  std::string item;
  int depth = 0;
  for (char c : text) {
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (c == ',' && depth == 0) {
      if (!item.empty()) out.push_back(parse_psi(item));
      item.clear();
      continue;
    }
    item += c;
  }
  if (!item.empty()) out.push_back(parse_psi(item));
  if (out.empty()) throw std::invalid_argument("psi list: empty");
  return out;
}

std::vector<double> parse_k_values(const std::string& text) {
  std::vector<double> out;
  double lo = 0, step = 0, hi = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &lo, &step, &hi) == 3) {
    if (!(step > 0.0)) throw std::invalid_argument("k range: step must be > 0");
    for (double k = lo; k <= hi + 1e-9; k += step) out.push_back(k);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    const double v = std::stod(item, &pos);
    if (pos != item.size())
      throw std::invalid_argument("k list: cannot parse '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("k list: empty");
  return out;
}

namespace {

json psi_json(const RegenerationDistribution& psi) { return format_psi(psi); }

json params_json(const MarketParams& p) {
  return json{{"p_c", p.p_c},       {"p_s", p.p_s},         {"beta", p.beta},
              {"alpha", p.alpha},   {"s", p.s},             {"c_serve", p.c_serve},
              {"c_lose", p.c_lose}, {"k", p.k},             {"psi", psi_json(p.psi)}};
}

void params_from_json(const json& j, MarketParams& p) {
  if (j.contains("p_c")) {
    p.p_c = j.at("p_c").get<double>();
    p.p_s = 1.0 - p.p_c;
  }
  if (j.contains("p_s")) p.p_s = j.at("p_s").get<double>();
  if (j.contains("beta")) p.beta = j.at("beta").get<double>();
  if (j.contains("alpha")) p.alpha = j.at("alpha").get<double>();
  if (j.contains("s")) p.s = j.at("s").get<double>();
  if (j.contains("c_serve")) p.c_serve = j.at("c_serve").get<double>();
  if (j.contains("c_lose")) p.c_lose = j.at("c_lose").get<double>();
  if (j.contains("k")) p.k = j.at("k").get<double>();
  if (j.contains("psi")) p.psi = parse_psi(j.at("psi").get<std::string>());
}

const char* case_mode_name(CaseStudyMode m) {
  switch (m) {
    case CaseStudyMode::kSolve: return "solve";
    case CaseStudyMode::kSimulate: return "simulate";
    case CaseStudyMode::kBoth: return "both";
  }
  return "?";
}

CaseStudyMode case_mode_from(const std::string& name) {
  if (name == "solve") return CaseStudyMode::kSolve;
  if (name == "simulate") return CaseStudyMode::kSimulate;
  if (name == "both") return CaseStudyMode::kBoth;
  throw std::invalid_argument("case_study.mode: unknown value '" + name + "'");
}

}  // namespace

json config_to_json(const RunConfig& c) {
  json j;
  j["mode"] = to_string(c.mode);
  j["model"] = c.all_models ? "all" : to_string(c.model);
  j["seed"] = c.seed;
  j["out"] = c.out_dir;
  j["workers"] = c.workers;
  j["params"] = params_json(c.params);
  j["grid"] = {{"b_max", c.grid.b_max}, {"delta", c.grid.delta}};
  j["solve"] = {{"z0", c.solve.z0},
                {"damping", c.solve.damping},
                {"tol", c.solve.tol},
                {"max_iters", c.solve.max_iters},
                {"dp_tol", c.solve.dp_tol},
                {"pi_tol", c.solve.pi_tol},
                {"premium_in_reward", c.solve.premium_in_reward},
                {"p_tie", c.solve.policy.p_tie}};
  j["sim"] = {{"agents", c.agents},
              {"steps", c.steps},
              {"policy_refresh_period", c.policy_refresh_period},
              {"belief_window", c.belief_window},
              {"initial_belief", c.initial_belief}};
  json sweep_psi = json::array();
  for (const auto& psi : c.sweep_psi) sweep_psi.push_back(psi_json(psi));
  j["sweep"] = {{"k", c.sweep_k}, {"psi", sweep_psi}, {"simulate", c.sweep_simulate}};
  json cs;
  if (c.case_trace.has_value()) cs["trace"] = *c.case_trace;
  cs["probs"] = {c.case_probs.both_good, c.case_probs.both_bad, c.case_probs.a_bad_b_good,
                 c.case_probs.a_good_b_bad};
  if (c.case_hours_a.has_value() && c.case_hours_b.has_value())
    cs["client_hours"] = {*c.case_hours_a, *c.case_hours_b};
  cs["unit_cents"] = c.case_unit_dollars * 100.0;
  cs["mode"] = case_mode_name(c.case_mode);
  cs["daytime"] = {c.case_daytime.start_hour, c.case_daytime.end_hour};
  cs["daytime_filter"] = c.case_daytime.filter;
  cs["paper_rounding"] = c.case_paper_rounding;
  cs["n_per_region"] = c.case_n_per_region;
  cs["steps"] = c.case_steps;
  j["case_study"] = cs;
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  try {
    if (j.contains("mode")) c.mode = run_mode_from_string(j.at("mode").get<std::string>());
    if (c.mode == RunMode::kCaseStudy) c.params = case_study_defaults();
    if (j.contains("model")) {
      const auto name = j.at("model").get<std::string>();
      if (name == "all")
        c.all_models = true;
      else
        c.model = loan_model_from_string(name);
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
    if (j.contains("workers")) c.workers = j.at("workers").get<int>();
    if (j.contains("params")) params_from_json(j.at("params"), c.params);
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      if (g.contains("b_max")) c.grid.b_max = g.at("b_max").get<double>();
      if (g.contains("delta")) c.grid.delta = g.at("delta").get<double>();
    }
    if (j.contains("solve")) {
      const auto& s = j.at("solve");
      if (s.contains("z0")) c.solve.z0 = s.at("z0").get<double>();
      if (s.contains("damping")) c.solve.damping = s.at("damping").get<double>();
      if (s.contains("tol")) c.solve.tol = s.at("tol").get<double>();
      if (s.contains("max_iters")) c.solve.max_iters = s.at("max_iters").get<int>();
      if (s.contains("dp_tol")) c.solve.dp_tol = s.at("dp_tol").get<double>();
      if (s.contains("pi_tol")) c.solve.pi_tol = s.at("pi_tol").get<double>();
      if (s.contains("premium_in_reward"))
        c.solve.premium_in_reward = s.at("premium_in_reward").get<bool>();
      if (s.contains("p_tie")) c.solve.policy.p_tie = s.at("p_tie").get<double>();
    }
    if (j.contains("sim")) {
      const auto& s = j.at("sim");
      if (s.contains("agents")) c.agents = s.at("agents").get<int>();
      if (s.contains("steps")) c.steps = s.at("steps").get<int>();
      if (s.contains("policy_refresh_period"))
        c.policy_refresh_period = s.at("policy_refresh_period").get<int>();
      if (s.contains("belief_window")) c.belief_window = s.at("belief_window").get<int>();
      if (s.contains("initial_belief"))
        c.initial_belief = s.at("initial_belief").get<double>();
    }
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      if (s.contains("k")) {
        if (s.at("k").is_string())
          c.sweep_k = parse_k_values(s.at("k").get<std::string>());
        else
          c.sweep_k = s.at("k").get<std::vector<double>>();
      }
      if (s.contains("psi")) {
        c.sweep_psi.clear();
        for (const auto& item : s.at("psi"))
          c.sweep_psi.push_back(parse_psi(item.get<std::string>()));
      }
      if (s.contains("simulate")) c.sweep_simulate = s.at("simulate").get<bool>();
    }
    if (j.contains("case_study")) {
      const auto& cs = j.at("case_study");
      if (cs.contains("trace")) c.case_trace = cs.at("trace").get<std::string>();
      if (cs.contains("probs")) {
        const auto p = cs.at("probs").get<std::vector<double>>();
        if (p.size() != 4)
          throw std::invalid_argument("case_study.probs: expected four probabilities");
        c.case_probs = {p[0], p[1], p[2], p[3]};
      }
      if (cs.contains("client_hours")) {
        const auto h = cs.at("client_hours").get<std::vector<long>>();
        if (h.size() != 2)
          throw std::invalid_argument("case_study.client_hours: expected two counts");
        c.case_hours_a = h[0];
        c.case_hours_b = h[1];
      }
      if (cs.contains("unit_cents"))
        c.case_unit_dollars = cs.at("unit_cents").get<double>() / 100.0;
      if (cs.contains("mode")) c.case_mode = case_mode_from(cs.at("mode").get<std::string>());
      if (cs.contains("daytime")) {
        const auto d = cs.at("daytime").get<std::vector<int>>();
        if (d.size() != 2)
          throw std::invalid_argument("case_study.daytime: expected [start_hour, end_hour]");
        c.case_daytime.start_hour = d[0];
        c.case_daytime.end_hour = d[1];
      }
      if (cs.contains("daytime_filter"))
        c.case_daytime.filter = cs.at("daytime_filter").get<bool>();
      if (cs.contains("paper_rounding"))
        c.case_paper_rounding = cs.at("paper_rounding").get<bool>();
      if (cs.contains("n_per_region")) c.case_n_per_region = cs.at("n_per_region").get<int>();
      if (cs.contains("steps")) c.case_steps = cs.at("steps").get<int>();
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config: " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw std::runtime_error("cannot create directory " + path + ": " + ec.message());
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void write_json(const std::string& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

void write_manifest(const std::string& dir, const RunConfig& config) {
  const json cfg = config_to_json(config);
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(fnv1a64(cfg.dump())));
  json j{{"tool", "a2amkt"},
         {"version", "0.1.0"},
         {"seed", config.seed},
         {"config_hash", hash},
         {"config", cfg}};
  write_json(dir + "/manifest.json", j);
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& series) {
  if (series.empty()) throw std::invalid_argument("metrics csv: empty series");
  std::string out =
      "step,empirical_z,trade_ratio,mean_budget,total_wealth,q05,q25,q50,q75,q95\n";
  for (const auto& m : series) {
    out += std::to_string(m.step);
    for (double v : {m.empirical_z, m.trade_ratio, m.mean_budget, m.total_wealth, m.q05,
                     m.q25, m.q50, m.q75, m.q95})
      out += "," + fmt_double(v);
    out += "\n";
  }
  write_text(path, out);
}

void write_value_csv(const std::string& path, const ValueFunction& v) {
  if (v.values.empty()) throw std::invalid_argument("value csv: empty value function");
  std::string out = "budget,value\n";
  for (int i = 0; i < v.grid.n(); ++i)
    out += fmt_double(v.grid.budget(i)) + "," + fmt_double(v.values[i]) + "\n";
  write_text(path, out);
}

void write_policy_csv(const std::string& path, const ClientPolicy& policy, double b_max) {
  std::string out = "from,to,action\n";
  double from = 0.0;
  bool zero = policy.first_bids_zero;
  for (double sp : policy.switch_points) {
    out += fmt_double(from) + "," + fmt_double(sp) + "," + (zero ? "bid0" : "bidK") + "\n";
    from = sp;
    zero = !zero;
  }
  out += fmt_double(from) + "," + fmt_double(b_max) + "," + (zero ? "bid0" : "bidK") + "\n";
  write_text(path, out);
}

void write_pi_csv(const std::string& path, const StationaryDistribution& pi) {
  if (pi.mass.empty()) throw std::invalid_argument("pi csv: empty distribution");
  std::string out = "budget,mass\n";
  for (int i = 0; i < pi.grid.n(); ++i)
    out += fmt_double(pi.grid.budget(i)) + "," + fmt_double(pi.mass[i]) + "\n";
  write_text(path, out);
}

void write_sweep_csv(const std::string& path, const std::vector<SweepCellResult>& rows) {
  if (rows.empty()) throw std::invalid_argument("sweep csv: empty table");
  std::string out = "k,psi,trade_ratio,expected_value,z_star,residual,converged,flagged,error\n";
  for (const auto& r : rows) {
    out += fmt_double(r.k) + "," + r.psi + "," + fmt_double(r.trade_ratio) + "," +
           fmt_double(r.expected_value) + "," + fmt_double(r.z_star) + "," +
           fmt_double(r.residual) + "," + (r.converged ? "1" : "0") + "," +
           (r.flagged ? "1" : "0") + "," + r.error + "\n";
  }
  write_text(path, out);
}

json report_to_json(const FixedPointReport& report) {
  json trace = json::array();
  for (const auto& [z, g] : report.trace) trace.push_back({z, g});
  return json{{"z_star", report.z_star},
              {"residual", report.residual},
              {"iterations", report.iterations},
              {"trade_ratio", report.trade_ratio},
              {"expected_value", report.expected_value},
              {"peer_premium", report.peer_premium},
              {"converged", report.converged},
              {"trace", trace}};
}

json summary_to_json(const SimSummary& s) {
  return json{{"terminal_z", s.terminal_z},
              {"terminal_trade_ratio", s.terminal_trade_ratio},
              {"terminal_z_se", s.terminal_z_se},
              {"terminal_window", s.terminal_window},
              {"final_belief", s.final_belief},
              {"final_premium", s.final_premium},
              {"mean_budget", s.mean_budget},
              {"total_trades", s.total_trades},
              {"total_matches", s.total_matches}};
}

json savings_to_json(const SavingsReport& r) {
  return json{{"client_hours_a", r.client_hours_a},
              {"client_hours_b", r.client_hours_b},
              {"trade_ratio_used", r.trade_ratio_used},
              {"unit_dollars", r.unit_dollars},
              {"market_savings", r.market_savings},
              {"net_metering_a", r.net_metering_a},
              {"net_metering_b", r.net_metering_b}};
}

std::string savings_to_text(const SavingsReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "client hours: region A %ld, region B %ld\n"
                "trade ratio used: %.4f\n"
                "market savings: $%.2f/year per agent\n"
                "net metering baseline: region A $%.2f/year, region B $%.2f/year\n",
                r.client_hours_a, r.client_hours_b, r.trade_ratio_used, r.market_savings,
                r.net_metering_a, r.net_metering_b);
  return buf;
}

void emit_belief_convergence_csv(const std::string& path,
                                 const std::vector<std::string>& labels,
                                 const std::vector<const std::vector<EpochMetrics>*>& series) {
  if (series.empty() || series[0]->empty())
    throw std::invalid_argument("belief csv: empty series");
  std::string out = "step";
  for (const auto& label : labels) out += ",z_" + label;
  out += "\n";
  std::size_t steps = series[0]->size();
  for (const auto* s : series) steps = std::min(steps, s->size());
  for (std::size_t t = 0; t < steps; ++t) {
    out += std::to_string((*series[0])[t].step);
    for (const auto* s : series) out += "," + fmt_double((*s)[t].belief);
    out += "\n";
  }
  write_text(path, out);
}

void emit_budget_cdf_csv(const std::string& path, const std::vector<std::string>& labels,
                         const std::vector<const std::vector<double>*>& budgets,
                         double b_max, double step) {
  if (budgets.empty() || budgets[0]->empty())
    throw std::invalid_argument("budget cdf csv: empty samples");
  std::vector<std::vector<double>> sorted;
  for (const auto* b : budgets) {
    sorted.push_back(*b);
    std::sort(sorted.back().begin(), sorted.back().end());
  }
  std::string out = "budget";
  for (const auto& label : labels) out += ",cdf_" + label;
  out += "\n";
  for (double b = 0.0; b <= b_max + 1e-9; b += step) {
    out += fmt_double(b);
    for (const auto& v : sorted) {
      const auto it = std::upper_bound(v.begin(), v.end(), b);
      out += "," + fmt_double(static_cast<double>(it - v.begin()) / v.size());
    }
    out += "\n";
  }
  write_text(path, out);
}

void emit_bid_hist_csv(const std::string& path, const std::vector<std::string>& labels,
                       const std::vector<const std::vector<EpochMetrics>*>& series, double k,
                       int window) {
  if (series.empty() || series[0]->empty())
    throw std::invalid_argument("bid hist csv: empty series");
  std::string out = "bid";
  for (const auto& label : labels) out += ",count_" + label;
  out += "\n";
  std::vector<long> zeros(series.size(), 0), ks(series.size(), 0);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = *series[i];
    const std::size_t from = s.size() > static_cast<std::size_t>(window)
                                 ? s.size() - static_cast<std::size_t>(window)
                                 : 0;
    for (std::size_t t = from; t < s.size(); ++t) {
      zeros[i] += s[t].bids_zero;
      ks[i] += s[t].trades;
    }
  }
  out += "0";
  for (long z : zeros) out += "," + std::to_string(z);
  out += "\n" + fmt_double(k);
  for (long v : ks) out += "," + std::to_string(v);
  out += "\n";
  write_text(path, out);
}

}  // namespace a2amkt
