// Command-line front end: solve / simulate / sweep / case-study / check.
// All numeric output goes to CSV/JSON files under the output directory; the
// terminal gets a short human-readable summary.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "a2amkt/casestudy.hpp"
#include "a2amkt/checks.hpp"
#include "a2amkt/io.hpp"
#include "a2amkt/market.hpp"
#include "a2amkt/mfe.hpp"
#include "a2amkt/sim.hpp"

namespace {

using namespace a2amkt;
using nlohmann::json;

SimConfig sim_config_from(const RunConfig& cfg, LoanModel model) {
  SimConfig sc;
  sc.n_agents = cfg.agents;
  sc.n_steps = cfg.steps;
  sc.params = cfg.params;
  sc.model = model;
  sc.seed = cfg.seed;
  sc.grid = cfg.grid;
  sc.policy_refresh_period = cfg.policy_refresh_period;
  sc.belief_window = cfg.belief_window;
  sc.initial_belief = cfg.initial_belief;
  sc.dp_tol = cfg.solve.dp_tol;
  sc.policy_opts = cfg.solve.policy;
  return sc;
}

int run_solve(const RunConfig& cfg) {
  auto report = solve_mfe(cfg.params, cfg.model, cfg.grid, cfg.solve);
  ensure_dir(cfg.out_dir);
  json j = report_to_json(report);
  j["model"] = to_string(cfg.model);
  j["params"] = config_to_json(cfg)["params"];
  for (const auto& w : cfg.params.band_warnings()) j["warnings"].push_back(w);
  write_json(cfg.out_dir + "/report.json", j);
  write_value_csv(cfg.out_dir + "/value.csv", report.value);
  write_policy_csv(cfg.out_dir + "/policy.csv", report.policy, cfg.grid.b_max);
  write_pi_csv(cfg.out_dir + "/pi.csv", report.pi);
  write_manifest(cfg.out_dir, cfg);
  std::cout << "mfe: z*=" << report.z_star << " trade_ratio=" << report.trade_ratio
            << " E[v]=" << report.expected_value << " residual=" << report.residual
            << (report.converged ? "" : "  [NOT CONVERGED]") << "\n";
  return report.converged ? 0 : 3;
}

int run_simulate(const RunConfig& cfg) {
  ensure_dir(cfg.out_dir);
  std::vector<LoanModel> models;
  if (cfg.all_models)
    models = {LoanModel::kHard, LoanModel::kBank, LoanModel::kPeerLoan};
  else
    models = {cfg.model};

  std::vector<SimResult> results;
  json summaries;
  for (LoanModel model : models) {
    SimResult res = run(sim_config_from(cfg, model));
    const std::string tag = to_string(model);
    write_metrics_csv(cfg.out_dir + "/metrics_" + tag + ".csv", res.series);
    summaries[tag] = summary_to_json(res.summary);
    std::cout << tag << ": terminal trade_ratio=" << res.summary.terminal_trade_ratio
              << " z=" << res.summary.terminal_z << "\n";
    results.push_back(std::move(res));
  }
  if (cfg.all_models) {
    std::vector<std::string> labels;
    std::vector<const std::vector<EpochMetrics>*> series;
    std::vector<const std::vector<double>*> budgets;
    for (std::size_t i = 0; i < models.size(); ++i) {
      labels.push_back(to_string(models[i]));
      series.push_back(&results[i].series);
      budgets.push_back(&results[i].final_budgets);
    }
    emit_belief_convergence_csv(cfg.out_dir + "/belief_convergence.csv", labels, series);
    emit_budget_cdf_csv(cfg.out_dir + "/budget_cdf.csv", labels, budgets,
                        std::min(cfg.grid.b_max, 60.0), 0.25);
    emit_bid_hist_csv(cfg.out_dir + "/bid_hist.csv", labels, series, cfg.params.k, 100);
  }
  write_json(cfg.out_dir + "/summary.json", summaries);
  write_manifest(cfg.out_dir, cfg);
  return 0;
}

int run_sweep(const RunConfig& cfg) {
  SweepRequest req;
  req.base = cfg.params;
  req.model = cfg.model;
  req.grid = cfg.grid;
  req.k_values = cfg.sweep_k;
  req.psi_options = cfg.sweep_psi;
  req.mode = cfg.sweep_simulate ? SweepMode::kSimulate : SweepMode::kSolve;
  req.solve = cfg.solve;
  req.sim = sim_config_from(cfg, cfg.model);
  req.seed = cfg.seed;
  req.workers = cfg.workers;
  auto rows = sweep(req);
  ensure_dir(cfg.out_dir);
  write_sweep_csv(cfg.out_dir + "/sweep.csv", rows);
  write_manifest(cfg.out_dir, cfg);
  int failures = 0;
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      ++failures;
      std::cout << "cell k=" << r.k << " psi=" << r.psi << " failed: " << r.error << "\n";
    }
  }
  std::cout << "sweep: " << rows.size() << " cells, " << failures << " failed -> "
            << cfg.out_dir << "/sweep.csv\n";
  return failures == 0 ? 0 : 3;
}

int run_case_study(const RunConfig& cfg) {
  CaseStudyConfig cs;
  cs.trace_path = cfg.case_trace;
  cs.probs = cfg.case_probs;
  cs.daytime = cfg.case_daytime;
  cs.client_hours_a = cfg.case_hours_a;
  cs.client_hours_b = cfg.case_hours_b;
  cs.params = cfg.params;
  cs.model = cfg.model;
  cs.grid = cfg.grid;
  cs.mode = cfg.case_mode;
  cs.solve = cfg.solve;
  cs.n_per_region = cfg.case_n_per_region;
  cs.n_steps = cfg.case_steps;
  cs.seed = cfg.seed;
  cs.unit_dollars = cfg.case_unit_dollars;
  cs.use_paper_rounding = cfg.case_paper_rounding;

  auto result = run_case_study(cs);
  ensure_dir(cfg.out_dir);

  json j;
  j["probs"] = {result.probs.both_good, result.probs.both_bad, result.probs.a_bad_b_good,
                result.probs.a_good_b_bad};
  j["type_a"] = {{"label", result.type_a.label}, {"p_c", result.type_a.p_c}};
  j["type_b"] = {{"label", result.type_b.label}, {"p_c", result.type_b.p_c}};
  j["trade_ratio"] = result.trade_ratio;
  if (result.coupled.has_value()) {
    j["coupled"] = {{"joint_trade_ratio", result.coupled->joint_trade_ratio},
                    {"converged", result.coupled->converged},
                    {"iterations", result.coupled->iterations},
                    {"a", report_to_json(result.coupled->a)},
                    {"b", report_to_json(result.coupled->b)}};
    write_value_csv(cfg.out_dir + "/value_a.csv", result.coupled->a.value);
    write_value_csv(cfg.out_dir + "/value_b.csv", result.coupled->b.value);
    write_pi_csv(cfg.out_dir + "/pi_a.csv", result.coupled->a.pi);
    write_pi_csv(cfg.out_dir + "/pi_b.csv", result.coupled->b.pi);
  }
  if (result.sim.has_value()) {
    const auto& sim = *result.sim;
    std::string out = "step,state,belief_a,belief_b,empirical_z,matches,trades\n";
    for (const auto& m : sim.series) {
      out += std::to_string(m.step) + "," + std::to_string(static_cast<int>(m.state)) + "," +
             fmt_double(m.belief_a) + "," + fmt_double(m.belief_b) + "," +
             fmt_double(m.empirical_z) + "," + std::to_string(m.matches) + "," +
             std::to_string(m.trades) + "\n";
    }
    write_text(cfg.out_dir + "/coupled_metrics.csv", out);
    std::vector<std::string> labels{"a", "b"};
    std::vector<const std::vector<double>*> budgets{&sim.final_budgets_a,
                                                    &sim.final_budgets_b};
    emit_budget_cdf_csv(cfg.out_dir + "/budget_cdf_types.csv", labels, budgets,
                        std::min(cfg.grid.b_max, 60.0), 0.25);
    j["sim"] = {{"joint_trade_ratio", sim.joint_trade_ratio},
                {"total_matches", sim.total_matches},
                {"total_trades", sim.total_trades}};
  }
  j["savings"] = savings_to_json(result.savings);
  write_json(cfg.out_dir + "/case_study.json", j);
  write_text(cfg.out_dir + "/savings.txt", savings_to_text(result.savings));
  write_manifest(cfg.out_dir, cfg);
  std::cout << "case study: trade_ratio=" << result.trade_ratio
            << " savings=$" << result.savings.market_savings << "/year\n";
  const bool converged = !result.coupled.has_value() || result.coupled->converged;
  return converged ? 0 : 3;
}

int run_check(const RunConfig& cfg) {
  ensure_dir(cfg.out_dir);
  json j;
  bool ok = true;

  {  // single-price dominance, the worked two-point instance plus random ones
    DiscreteBidDist server{{6.5, 7.0}, {0.5, 0.5}};
    DiscreteBidDist client{{6.5, 7.0}, {0.3, 0.7}};
    auto res = single_price_dominance(server, client, 7.0, 20.0);
    j["single_price_dominance"] = {{"kappa", res.kappa},
                                   {"kappa_prime", res.kappa_prime},
                                   {"dominated", res.dominated},
                                   {"conclusive", res.conclusive}};
    ok = ok && res.dominated;
  }
  {  // facts audit on the unified-price equilibrium shape
    DiscreteBidDist server{{cfg.params.k}, {1.0}};
    DiscreteBidDist client{{0.0, cfg.params.k}, {0.2, 0.8}};
    auto violations = equilibrium_facts_audit(server, client);
    json arr = json::array();
    for (const auto& v : violations)
      arr.push_back({{"fact", v.fact}, {"bid", v.bid}, {"what", v.what}});
    j["facts_audit"] = {{"violations", arr}};
    ok = ok && violations.empty();
  }
  {
    auto rep = lipschitz_probe(cfg.params, cfg.model, cfg.grid,
                               {0.0, 0.25, 0.5, 0.75, 1.0}, cfg.solve.dp_tol);
    j["lipschitz_probe"] = {{"max_ratio", rep.max_ratio},
                            {"bound", rep.bound},
                            {"within", rep.within}};
    ok = ok && rep.within;
  }
  {
    std::vector<GridSpec> grids{{cfg.grid.b_max, cfg.grid.delta * 2.0},
                                {cfg.grid.b_max, cfg.grid.delta},
                                {cfg.grid.b_max, cfg.grid.delta / 2.0}};
    auto counts = policy_piece_audit(cfg.params, cfg.model, 0.2, grids, cfg.solve.dp_tol);
    const bool stable = counts.size() >= 2 && counts[counts.size() - 1] == counts[counts.size() - 2];
    j["policy_piece_audit"] = {{"counts", counts}, {"stable", stable}};
    ok = ok && stable;
  }
  j["pass"] = ok;
  write_json(cfg.out_dir + "/checks.json", j);
  write_manifest(cfg.out_dir, cfg);
  std::cout << "checks: " << (ok ? "pass" : "FAIL") << " -> " << cfg.out_dir
            << "/checks.json\n";
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bilateral sharing-market equilibrium solver and simulator"};
  app.require_subcommand(1);

  std::string config_path, model_name, psi_text, out_dir, k_text, sweep_psi_text;
  std::string trace_path, case_mode_name;
  double k = 0, alpha = 0, beta = 0, s = 0, c_serve = 0, c_lose = 0, p_c = 0;
  double z0 = 0, damping = 0, tol = 0, grid_delta = 0, grid_bmax = 0, unit_cents = 0;
  long long seed = 0;
  int agents = 0, steps = 0, workers = 0;
  long hours_a = 0, hours_b = 0;
  bool paper_rounding = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--model", model_name, "hard|bank|peer-loan (simulate also: all)");
    cmd->add_option("--k", k, "unified price");
    cmd->add_option("--psi", psi_text, "regeneration distribution, e.g. U[0,5]");
    cmd->add_option("--alpha", alpha, "overdraft repayment factor");
    cmd->add_option("--beta", beta, "survival probability");
    cmd->add_option("--s", s, "trade surplus");
    cmd->add_option("--c-serve", c_serve, "service cost");
    cmd->add_option("--c-lose", c_lose, "failed-trade disutility");
    cmd->add_option("--p-c", p_c, "client-role probability");
    cmd->add_option("--seed", seed, "master seed");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--workers", workers, "parallel sweep workers");
    cmd->add_option("--agents", agents, "simulated agents");
    cmd->add_option("--steps", steps, "simulated steps");
    cmd->add_option("--grid-delta", grid_delta, "budget grid step");
    cmd->add_option("--grid-bmax", grid_bmax, "budget grid truncation");
    cmd->add_option("--z0", z0, "fixed-point starting belief");
    cmd->add_option("--damping", damping, "fixed-point damping");
    cmd->add_option("--tol", tol, "fixed-point tolerance");
  };

  CLI::App* cmd_solve = app.add_subcommand("solve", "compute the MFE analytically");
  CLI::App* cmd_sim = app.add_subcommand("simulate", "Monte Carlo population run");
  CLI::App* cmd_sweep = app.add_subcommand("sweep", "trade ratio and value across k and psi");
  CLI::App* cmd_case = app.add_subcommand("case-study", "two-region weather-driven market");
  CLI::App* cmd_check = app.add_subcommand("check", "structural theory checks");
  for (auto* cmd : {cmd_solve, cmd_sim, cmd_sweep, cmd_case, cmd_check}) add_common(cmd);

  cmd_sweep->add_option("--sweep-k", k_text, "k grid, lo:step:hi or comma list");
  cmd_sweep->add_option("--sweep-psi", sweep_psi_text, "comma-separated psi list");
  bool sweep_sim = false;
  cmd_sweep->add_flag("--sim", sweep_sim, "simulate each cell instead of solving");

  cmd_case->add_option("--trace", trace_path, "weather trace CSV");
  cmd_case->add_option("--case-mode", case_mode_name, "solve|simulate|both");
  cmd_case->add_option("--hours-a", hours_a, "client hours, region A");
  cmd_case->add_option("--hours-b", hours_b, "client hours, region B");
  cmd_case->add_option("--unit-cents", unit_cents, "currency unit in cents");
  cmd_case->add_flag("--paper-rounding", paper_rounding, "round role probabilities to 0.6/0.4");

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* active = app.get_subcommands().front();
    RunMode mode = run_mode_from_string(active->get_name());

    RunConfig cfg;
    if (!config_path.empty()) {
      cfg = load_config_file(config_path);
    } else if (mode == RunMode::kCaseStudy) {
      cfg.params = case_study_defaults();
    }
    cfg.mode = mode;

    if (active->count("--model")) {
      if (model_name == "all")
        cfg.all_models = true;
      else
        cfg.model = loan_model_from_string(model_name);
    }
    if (active->count("--k")) cfg.params.k = k;
    if (active->count("--psi")) cfg.params.psi = parse_psi(psi_text);
    if (active->count("--alpha")) cfg.params.alpha = alpha;
    if (active->count("--beta")) cfg.params.beta = beta;
    if (active->count("--s")) cfg.params.s = s;
    if (active->count("--c-serve")) cfg.params.c_serve = c_serve;
    if (active->count("--c-lose")) cfg.params.c_lose = c_lose;
    if (active->count("--p-c")) {
      cfg.params.p_c = p_c;
      cfg.params.p_s = 1.0 - p_c;
    }
    if (active->count("--seed")) cfg.seed = static_cast<std::uint64_t>(seed);
    if (active->count("--out")) cfg.out_dir = out_dir;
    if (active->count("--workers")) cfg.workers = workers;
    if (active->count("--agents")) cfg.agents = agents;
    if (active->count("--steps")) {
      cfg.steps = steps;
      cfg.case_steps = steps;
    }
    if (active->count("--grid-delta")) cfg.grid.delta = grid_delta;
    if (active->count("--grid-bmax")) cfg.grid.b_max = grid_bmax;
    if (active->count("--z0")) cfg.solve.z0 = z0;
    if (active->count("--damping")) cfg.solve.damping = damping;
    if (active->count("--tol")) cfg.solve.tol = tol;
    if (cmd_sweep->count("--sweep-k")) cfg.sweep_k = parse_k_values(k_text);
    if (cmd_sweep->count("--sweep-psi")) cfg.sweep_psi = parse_psi_list(sweep_psi_text);
    if (cmd_sweep->count("--sim")) cfg.sweep_simulate = sweep_sim;
    if (cmd_case->count("--trace")) cfg.case_trace = trace_path;
    if (cmd_case->count("--case-mode"))
      cfg.case_mode = case_mode_name == "simulate" ? CaseStudyMode::kSimulate
                      : case_mode_name == "both"   ? CaseStudyMode::kBoth
                                                   : CaseStudyMode::kSolve;
    if (cmd_case->count("--hours-a")) cfg.case_hours_a = hours_a;
    if (cmd_case->count("--hours-b")) cfg.case_hours_b = hours_b;
    if (cmd_case->count("--unit-cents")) cfg.case_unit_dollars = unit_cents / 100.0;
    if (cmd_case->count("--paper-rounding")) cfg.case_paper_rounding = paper_rounding;

    if (!active->count("--out") && config_path.empty()) {
      if (const char* env = std::getenv("A2AMKT_OUT")) cfg.out_dir = env;
    }

    cfg.validate();
    for (const auto& w : cfg.params.band_warnings())
      std::cerr << "warning: " << w << "\n";

    switch (cfg.mode) {
      case RunMode::kSolve: return run_solve(cfg);
      case RunMode::kSimulate: return run_simulate(cfg);
      case RunMode::kSweep: return run_sweep(cfg);
      case RunMode::kCaseStudy: return run_case_study(cfg);
      case RunMode::kCheck: return run_check(cfg);
    }
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", e.what()}};
    std::cerr << err.dump() << "\n";
    return 2;
  }
  return 0;
}
