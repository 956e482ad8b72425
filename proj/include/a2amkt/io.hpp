#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "a2amkt/casestudy.hpp"
#include "a2amkt/market.hpp"
#include "a2amkt/mfe.hpp"
#include "a2amkt/sim.hpp"

namespace a2amkt {

enum class RunMode { kSolve, kSimulate, kSweep, kCaseStudy, kCheck };

const char* to_string(RunMode mode);
RunMode run_mode_from_string(const std::string& name);

// Everything a run needs; defaults reproduce the homogeneous simulation setup
// (case-study mode swaps in its own parameter defaults before overrides).
struct RunConfig {
  RunMode mode = RunMode::kSolve;
  MarketParams params;
  LoanModel model = LoanModel::kBank;
  bool all_models = false;  // simulate hard+bank+peer-loan side by side
  GridSpec grid;
  SolveOptions solve;

  int agents = 100000;
  int steps = 2000;
  int policy_refresh_period = 10;
  int belief_window = 10;
  double initial_belief = 1.0;

  std::vector<double> sweep_k = {6.0,  6.25, 6.5,  6.75, 7.0,
                                 7.25, 7.5,  7.75, 8.0,  8.25};
  std::vector<RegenerationDistribution> sweep_psi = {
      RegenerationDistribution::uniform(0.0, 5.0),
      RegenerationDistribution::uniform(3.0, 8.0),
      RegenerationDistribution::uniform(5.0, 10.0)};
  bool sweep_simulate = false;

  std::optional<std::string> case_trace;
  JointWeatherProbs case_probs;
  DaytimeRule case_daytime;
  std::optional<long> case_hours_a;
  std::optional<long> case_hours_b;
  double case_unit_dollars = 0.025;
  CaseStudyMode case_mode = CaseStudyMode::kSolve;
  bool case_paper_rounding = false;
  int case_n_per_region = 20000;
  int case_steps = 1500;

  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int workers = 1;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

// "U[lo,hi]", "point[v]" or "tab[b1:w1,b2:w2,...]"
RegenerationDistribution parse_psi(const std::string& text);
std::string format_psi(const RegenerationDistribution& psi);
// comma-separated psi specs; commas inside brackets do not split
std::vector<RegenerationDistribution> parse_psi_list(const std::string& text);
// "lo:step:hi" or a comma-separated list
std::vector<double> parse_k_values(const std::string& text);

nlohmann::json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config_file(const std::string& path);

std::uint64_t fnv1a64(const std::string& text);

// ----- output files ---------------------------------------------------------

void ensure_dir(const std::string& path);
std::string fmt_double(double x);  // shortest stable decimal form

void write_text(const std::string& path, const std::string& text);
void write_json(const std::string& path, const nlohmann::json& j);
void write_manifest(const std::string& dir, const RunConfig& config);

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& series);
void write_value_csv(const std::string& path, const ValueFunction& v);
void write_policy_csv(const std::string& path, const ClientPolicy& policy, double b_max);
void write_pi_csv(const std::string& path, const StationaryDistribution& pi);
void write_sweep_csv(const std::string& path, const std::vector<SweepCellResult>& rows);

nlohmann::json report_to_json(const FixedPointReport& report);
nlohmann::json summary_to_json(const SimSummary& summary);
nlohmann::json savings_to_json(const SavingsReport& report);
std::string savings_to_text(const SavingsReport& report);

// Fig.-shaped tables: one column per model / type, deterministic layout.
void emit_belief_convergence_csv(const std::string& path,
                                 const std::vector<std::string>& labels,
                                 const std::vector<const std::vector<EpochMetrics>*>& series);
void emit_budget_cdf_csv(const std::string& path, const std::vector<std::string>& labels,
                         const std::vector<const std::vector<double>*>& budgets,
                         double b_max, double step);
void emit_bid_hist_csv(const std::string& path, const std::vector<std::string>& labels,
                       const std::vector<const std::vector<EpochMetrics>*>& series, double k,
                       int window);

}  // namespace a2amkt
