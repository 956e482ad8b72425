#include "a2amkt/casestudy.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace a2amkt {

void JointWeatherProbs::validate() const {
  const double vals[4] = {both_good, both_bad, a_bad_b_good, a_good_b_bad};
  double total = 0.0;
  for (double v : vals) {
    if (!(v >= 0.0)) throw std::invalid_argument("weather probs: must be >= 0");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("weather probs: must sum to 1");
}

namespace {

bool parse_bool_field(const std::string& field, int line_no) {
  if (field == "0" || field == "false") return false;
  if (field == "1" || field == "true") return true;
  throw std::invalid_argument("weather trace line " + std::to_string(line_no) +
                              ": bad boolean '" + field + "'");
}

WeatherRow parse_row(const std::string& line, int line_no) {
  std::stringstream ss(line);
  std::string ts, fa, fb;
  if (!std::getline(ss, ts, ',') || !std::getline(ss, fa, ',') || !std::getline(ss, fb))
    throw std::invalid_argument("weather trace line " + std::to_string(line_no) +
                                ": expected timestamp,region_a_good,region_b_good");
  WeatherRow row;
  row.timestamp = ts;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  char sep = 0;
  if (std::sscanf(ts.c_str(), "%d-%d-%d%c%d:%d", &y, &mo, &d, &sep, &h, &mi) < 5 ||
      (sep != 'T' && sep != ' '))
    throw std::invalid_argument("weather trace line " + std::to_string(line_no) +
                                ": bad ISO-8601 timestamp '" + ts + "'");
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59)
    throw std::invalid_argument("weather trace line " + std::to_string(line_no) +
                                ": timestamp out of range '" + ts + "'");
  // coarse minutes-since-epoch ordinal; only monotonicity matters
  row.minutes = (((static_cast<long long>(y) * 12 + mo) * 31 + d) * 24 + h) * 60 + mi;
  row.hour_of_day = h;
  row.a_good = parse_bool_field(fa, line_no);
  row.b_good = parse_bool_field(fb, line_no);
  return row;
}

}  // namespace

WeatherStats ingest_weather_rows(const WeatherTrace& trace, const DaytimeRule& rule) {
  if (trace.rows.empty()) throw std::invalid_argument("weather trace: no rows");
  WeatherStats stats;
  long long prev = -1;
  long counts[4] = {0, 0, 0, 0};
  for (const auto& row : trace.rows) {
    if (row.minutes <= prev)
      throw std::invalid_argument("weather trace: timestamps must be strictly increasing at " +
                                  row.timestamp);
    prev = row.minutes;
    if (rule.filter && (row.hour_of_day < rule.start_hour || row.hour_of_day >= rule.end_hour))
      continue;
    stats.daytime.rows.push_back(row);
    HourState st;
    if (row.a_good && row.b_good)
      st = HourState::kIdleBothGood;
    else if (!row.a_good && !row.b_good)
      st = HourState::kIdleBothBad;
    else if (!row.a_good)
      st = HourState::kClientA;
    else
      st = HourState::kClientB;
    stats.states.push_back(st);
    ++counts[static_cast<int>(st)];
  }
  const long total = counts[0] + counts[1] + counts[2] + counts[3];
  if (total == 0)
    throw std::invalid_argument("weather trace: no daytime hours under the current rule");
  stats.probs.both_good = static_cast<double>(counts[0]) / total;
  stats.probs.both_bad = static_cast<double>(counts[1]) / total;
  stats.probs.a_bad_b_good = static_cast<double>(counts[2]) / total;
  stats.probs.a_good_b_bad = static_cast<double>(counts[3]) / total;
  stats.client_hours_a = counts[2];
  stats.client_hours_b = counts[3];
  return stats;
}

WeatherStats ingest_weather_trace(const std::string& path, const DaytimeRule& rule) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("weather trace: cannot open " + path);
  WeatherTrace trace;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "timestamp,region_a_good,region_b_good")
        throw std::invalid_argument(
            "weather trace: expected header timestamp,region_a_good,region_b_good");
      continue;
    }
    trace.rows.push_back(parse_row(line, line_no));
  }
  return ingest_weather_rows(trace, rule);
}

std::pair<TypeProfile, TypeProfile> derive_role_probs(const JointWeatherProbs& probs,
                                                      const RegenerationDistribution& psi,
                                                      const std::string& label_a,
                                                      const std::string& label_b) {
  probs.validate();
  const double mixed = probs.a_bad_b_good + probs.a_good_b_bad;
  if (mixed <= 0.0)
    throw std::invalid_argument(
        "derive_role_probs: no mixed-weather hours, the market never operates");
  TypeProfile a;
  a.type_id = 0;
  a.p_c = probs.a_bad_b_good / mixed;
  a.p_s = 1.0 - a.p_c;
  a.psi = psi;
  a.label = label_a;
  TypeProfile b;
  b.type_id = 1;
  b.p_c = 1.0 - a.p_c;
  b.p_s = a.p_c;
  b.psi = psi;
  b.label = label_b;
  return {a, b};
}

SavingsReport savings(long client_hours_a, long client_hours_b, const MarketParams& params,
                      double trade_ratio, double unit_dollars) {
  if (!(trade_ratio >= 0.0 && trade_ratio <= 1.0))
    throw std::invalid_argument("savings: trade_ratio must lie in [0,1]");
  SavingsReport rep;
  rep.client_hours_a = client_hours_a;
  rep.client_hours_b = client_hours_b;
  rep.trade_ratio_used = trade_ratio;
  rep.unit_dollars = unit_dollars;
  rep.market_savings = (client_hours_a * (params.s - params.k) +
                        client_hours_b * (params.k - params.c_serve)) *
                       unit_dollars * trade_ratio;
  // net-metering baseline: the grid's buyback rate nets servers zero, and a
  // client-hour costs s cents of retail electricity
  rep.net_metering_a = -static_cast<double>(client_hours_a) * params.s / 100.0;
  rep.net_metering_b = -static_cast<double>(client_hours_b) * params.s / 100.0;
  return rep;
}

MarketParams case_study_defaults() {
  MarketParams p;
  p.s = 10.0;
  p.c_serve = 5.0;
  p.k = 7.5;
  p.psi = RegenerationDistribution::uniform(5.0, 10.0);
  return p;
}

CaseStudyResult run_case_study(const CaseStudyConfig& config) {
  CaseStudyResult result;
  std::vector<HourState> replay;

  if (config.trace_path.has_value()) {
    WeatherStats stats = ingest_weather_trace(*config.trace_path, config.daytime);
    result.probs = stats.probs;
    result.client_hours_a = stats.client_hours_a;
    result.client_hours_b = stats.client_hours_b;
    replay = std::move(stats.states);
  } else {
    result.probs = config.probs;
    result.probs.validate();
  }
  if (config.client_hours_a.has_value()) result.client_hours_a = *config.client_hours_a;
  if (config.client_hours_b.has_value()) result.client_hours_b = *config.client_hours_b;

  auto [type_a, type_b] =
      derive_role_probs(result.probs, config.params.psi, "region-a", "region-b");
  if (config.use_paper_rounding) {
    type_a.p_c = std::round(type_a.p_c * 10.0) / 10.0;
    type_a.p_s = 1.0 - type_a.p_c;
    type_b.p_c = 1.0 - type_a.p_c;
    type_b.p_s = type_a.p_c;
  }
  result.type_a = type_a;
  result.type_b = type_b;

  if (config.mode == CaseStudyMode::kSolve || config.mode == CaseStudyMode::kBoth) {
    result.coupled = solve_coupled_mfe(type_a, type_b, config.params, config.model,
                                       config.grid, config.solve);
    result.trade_ratio = result.coupled->joint_trade_ratio;
  }
  if (config.mode == CaseStudyMode::kSimulate || config.mode == CaseStudyMode::kBoth) {
    CoupledSimConfig sc;
    sc.n_per_region = config.n_per_region;
    sc.n_steps = config.n_steps;
    sc.params = config.params;
    sc.region_a = {type_a.p_c, type_a.psi, type_a.label};
    sc.region_b = {type_b.p_c, type_b.psi, type_b.label};
    sc.state_probs[0] = result.probs.both_good;
    sc.state_probs[1] = result.probs.both_bad;
    sc.state_probs[2] = result.probs.a_bad_b_good;
    sc.state_probs[3] = result.probs.a_good_b_bad;
    sc.replay = std::move(replay);
    sc.model = config.model;
    sc.seed = config.seed;
    sc.grid = config.grid;
    result.sim = run_coupled(sc);
    // prefer the realized ratio when a simulation ran
    result.trade_ratio = result.sim->joint_trade_ratio;
  }

  result.savings = savings(result.client_hours_a, result.client_hours_b, config.params,
                           result.trade_ratio, config.unit_dollars);
  return result;
}

}  // namespace a2amkt
