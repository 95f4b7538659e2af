#include "recauction/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "recauction/design.hpp"
#include "recauction/io.hpp"
#include "recauction/simulate.hpp"

namespace recauction::cli {

namespace fs = std::filesystem;

bool GoldenCheck::pass() const
{
  return std::isfinite(computed) && std::fabs(computed - expected) <= tolerance + 1e-12;
}

namespace {

AuctionPrimitives prims(ValueDistribution d, int N, int T, double delta, double K,
                        std::vector<double> r)
{
  return AuctionPrimitives{std::move(d), N, T, delta, 0.0, K, std::move(r)};
}

double flag(bool b) { return b ? 1.0 : 0.0; }

std::vector<GoldenCheck> example1()
{
  auto const  u  = ValueDistribution::uniform(0.0, 1.0);
  auto const  p1 = prims(u, 2, 1, 0.97, 0.2, {0.0});
  auto const  se = single_round_efficient(p1);
  auto const  sr = single_round_revenue_optimal(p1);
  auto const  p2 = prims(u, 2, 2, 0.97, 0.2, {0.14, 0.0});
  auto const  th = solve_thresholds(p2);
  auto const  s2 = summarize(th, p2);
  auto const  p3 = p2.with_reserves({0.4, 0.37});
  auto const  s3 = summarize(solve_thresholds(p3), p3);
  ThresholdSequence single{{1.0, se.cutoff}};
  return {
      {"single-round cutoff", 0.45, se.cutoff, 0.005},
      {"single-round total surplus", 0.39, se.surplus, 0.005},
      {"recurring threshold v1 at r=(0.14,0)", 0.66, th[1], 0.01},
      {"recurring threshold v2 at r=(0.14,0)", 0.36, th[2], 0.01},
      {"recurring total surplus", 0.42, s2.total_surplus, 0.005},
      {"single-round failure probability", 0.20, failure_probability(single, p1), 0.005},
      {"recurring failure probability", 0.13, s2.failure_probability, 0.005},
      {"revenue-optimal single-round reserve", 0.35, sr.reserve, 0.01},
      {"revenue-optimal single-round revenue", 0.25, sr.revenue, 0.005},
      {"recurring revenue at r=(0.4,0.37)", 0.26, s3.revenue, 0.005},
  };
}

std::vector<GoldenCheck> example2()
{
  auto const  u = ValueDistribution::uniform(1.0, 2.0);
  std::vector<double> ts1, ts2, ts3;
  for (int N = 2; N <= 10; ++N)
  {
    auto const p = prims(u, N, 1, 0.97, 0.3, {0.0});
    ts1.push_back(single_round_efficient(p).surplus);
    ts2.push_back(efficient_design(p.with_horizon(2)).objective_value);
    ts3.push_back(efficient_design(p.with_horizon(3)).objective_value);
  }
  auto strictly = [](std::vector<double> const &x, bool up) {
    for (std::size_t i = 1; i < x.size(); ++i)
    {
      if (up ? !(x[i] > x[i - 1]) : !(x[i] < x[i - 1]))
      {
        return false;
      }
    }
    return true;
  };
  double const c2 = always_enter_partner_cutoff(u, 0.3);
  auto const   duo = asymmetric_duopoly_single_round(prims(u, 2, 1, 0.97, 0.3, {0.0}), u.lower(), c2);
  return {
      {"single-round efficient TS, N=2", 1.20, ts1[0], 0.01},
      {"2-period designed TS, N=2", 1.23, ts2[0], 0.01},
      {"3-period designed TS, N=2", 1.26, ts3[0], 0.01},
      {"single-round TS strictly decreasing in N=2..10", 1.0, flag(strictly(ts1, false)), 0.0},
      {"2-period TS strictly increasing in N=2..10", 1.0, flag(strictly(ts2, true)), 0.0},
      {"3-period TS strictly increasing in N=2..10", 1.0, flag(strictly(ts3, true)), 0.0},
      {"asymmetric duopoly partner cutoff", 1.77, c2, 0.01},
      {"asymmetric duopoly TS", 1.22, duo.surplus, 0.01},
  };
}

std::vector<GoldenCheck> footnotes()
{
  auto const pw = prims(ValueDistribution::power(4.0), 2, 1, 0.97, 0.4, {0.0});
  auto const uu = prims(ValueDistribution::uniform(0.6, 1.0), 2, 1, 0.97, 0.2, {0.0});
  return {
      {"Power(4) symmetric single-round profit", 0.25155, single_round_revenue_optimal(pw).revenue, 0.001},
      {"Power(4) asymmetric (0.816,0.92) profit", 0.2525,
       asymmetric_duopoly_single_round(pw, 0.816, 0.92).revenue, 0.001},
      {"Power(4) designed 2-period revenue", 0.2935, revenue_design(pw.with_horizon(2)).objective_value, 0.002},
      {"Uniform(0.6,1) symmetric single-round profit", 0.427, single_round_revenue_optimal(uu).revenue, 0.001},
      {"Uniform(0.6,1) asymmetric (0.66,0.86) profit", 0.431,
       asymmetric_duopoly_single_round(uu, 0.66, 0.86).revenue, 0.001},
      {"Uniform(0.6,1) designed 2-period revenue", 0.467, revenue_design(uu.with_horizon(2)).objective_value, 0.002},
  };
}

std::vector<GoldenCheck> synthetic_checks(SyntheticCounterfactual const &sc)
{
  auto c = [&](int T, double s) { return sc.at(T, s); };
  double const d12_ts = c(2, 1.0).surplus - c(1, 1.0).surplus;
  double const d23_ts = c(3, 1.0).surplus - c(2, 1.0).surplus;
  double const d12_r  = c(2, 1.0).revenue - c(1, 1.0).revenue;
  double const d23_r  = c(3, 1.0).revenue - c(2, 1.0).revenue;
  std::vector<GoldenCheck> out{
      {"TS weakly increasing in T", 1.0, flag(d12_ts >= 0.0 && d23_ts >= 0.0), 0.0},
      {"revenue weakly increasing in T", 1.0, flag(d12_r >= 0.0 && d23_r >= 0.0), 0.0},
      {"TS gain T=2->3 below T=1->2", 1.0, flag(d23_ts < d12_ts), 0.0},
      {"revenue gain T=2->3 below T=1->2", 1.0, flag(d23_r < d12_r), 0.0},
  };
  bool ts_down = true, r_down = true;
  for (int T : sc.horizons)
  {
    ts_down = ts_down && c(T, 1.1).surplus <= c(T, 1.0).surplus;
    r_down  = r_down && c(T, 1.1).revenue <= c(T, 1.0).revenue;
  }
  out.push_back({"higher entry cost weakly lowers TS at every T", 1.0, flag(ts_down), 0.0});
  out.push_back({"higher entry cost weakly lowers revenue at every T", 1.0, flag(r_down), 0.0});
  int const lo = sc.horizons.front();
  int const hi = sc.horizons.back();
  out.push_back({"TS cost effect smaller at T=3 than T=1", 1.0,
                 flag(std::fabs(c(hi, 1.1).surplus - c(hi, 1.0).surplus) <
                      std::fabs(c(lo, 1.1).surplus - c(lo, 1.0).surplus)),
                 0.0});
  out.push_back({"revenue cost effect smaller at T=3 than T=1", 1.0,
                 flag(std::fabs(c(hi, 1.1).revenue - c(hi, 1.0).revenue) <
                      std::fabs(c(lo, 1.1).revenue - c(lo, 1.0).revenue)),
                 0.0});
  return out;
}

}  // namespace

std::vector<std::string> golden_targets()
{
  return {"example1", "example2", "footnotes", "counterfactual-synthetic"};
}

std::vector<GoldenCheck> golden_suite(std::string const &target)
{
  if (target == "example1")
  {
    return example1();
  }
  if (target == "example2")
  {
    return example2();
  }
  if (target == "footnotes")
  {
    return footnotes();
  }
  if (target == "counterfactual-synthetic")
  {
    return synthetic_checks(synthetic_counterfactual(50, 1));
  }
  throw ConfigError("unknown reproduce target '" + target + "'");
}

std::string golden_csv(std::vector<GoldenCheck> const &checks)
{
  std::ostringstream os;
  os << "check,expected,computed,tolerance,result\n";
  for (auto const &c : checks)
  {
    os << '"' << c.name << "\"," << fmt6(c.expected) << ',' << fmt6(c.computed) << ','
       << fmt6(c.tolerance) << ',' << (c.pass() ? "pass" : "FAIL") << '\n';
  }
  return os.str();
}

SyntheticCell const &SyntheticCounterfactual::at(int T, double cost_scale) const
{
  for (auto const &c : cells)
  {
    if (c.T == T && std::fabs(c.cost_scale - cost_scale) < 1e-12)
    {
      return c;
    }
  }
  throw std::out_of_range("no counterfactual cell for the requested horizon and cost scale");
}

SyntheticCounterfactual synthetic_counterfactual(long draws, std::uint64_t seed,
                                                 std::vector<int> const    &horizons,
                                                 std::vector<double> const &cost_scales,
                                                 HyperParams const &B, EstimationModel const &model)
{
  if (draws < 1 || horizons.empty() || cost_scales.empty())
  {
    throw std::invalid_argument("counterfactual needs draws, horizons and cost scales");
  }
  EstimationModel m = model;
  m.T               = *std::max_element(horizons.begin(), horizons.end());
  std::vector<AuctionParams> truth;
  Dataset const              data = generate_synthetic(B, draws, seed, {}, m, &truth);

  SyntheticCounterfactual sc;
  sc.horizons    = horizons;
  sc.cost_scales = cost_scales;
  std::size_t const         ncell = horizons.size() * cost_scales.size();
  std::vector<SyntheticCell> sum(ncell);
  for (std::size_t a = 0; a < cost_scales.size(); ++a)
  {
    for (std::size_t b = 0; b < horizons.size(); ++b)
    {
      sum[a * horizons.size() + b] = {horizons[b], cost_scales[a], 0.0, 0.0, 0.0};
    }
  }
  std::vector<SyntheticCell> one(ncell);
  for (std::size_t i = 0; i < data.size(); ++i)
  {
    auto const base = auction_primitives(truth[i], data[i].N, data[i].reserves, m);
    try
    {
      for (std::size_t k = 0; k < ncell; ++k)
      {
        auto p = base.with_horizon(sum[k].T);
        p.K *= sum[k].cost_scale;
        auto const eq = solve_equilibrium(p, m.solver);
        auto const s  = summarize(eq.thresholds, p);
        one[k]        = {sum[k].T, sum[k].cost_scale, s.total_surplus, s.revenue,
                         s.failure_probability};
      }
    }
    catch (SolverError const &)
    {
      ++sc.solver_failures;
      continue;
    }
    ++sc.draws;
    for (std::size_t k = 0; k < ncell; ++k)
    {
      sum[k].surplus += one[k].surplus;
      sum[k].revenue += one[k].revenue;
      sum[k].failure += one[k].failure;
    }
  }
  if (sc.draws == 0)
  {
    throw SolverError("every synthetic draw failed to solve");
  }
  for (auto &c : sum)
  {
    c.surplus /= sc.draws;
    c.revenue /= sc.draws;
    c.failure /= sc.draws;
  }
  sc.cells = std::move(sum);
  return sc;
}

std::string synthetic_counterfactual_csv(SyntheticCounterfactual const &sc)
{
  std::ostringstream os;
  os << "# draws=" << sc.draws << " solver_failures=" << sc.solver_failures << '\n';
  os << "T,cost_scale,total_surplus,revenue,failure_probability\n";
  for (auto const &c : sc.cells)
  {
    os << c.T << ',' << fmt6(c.cost_scale) << ',' << fmt6(c.surplus) << ',' << fmt6(c.revenue)
       << ',' << fmt6(c.failure) << '\n';
  }
  return os.str();
}

namespace {

struct Flags
{
  std::string                  config;
  std::string                  out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<long>          draws;
  int                          workers = 1;
  std::string                  target;
};

Json load_config(Flags const &f)
{
  if (f.config.empty())
  {
    throw ConfigError("--config is required");
  }
  return read_json_file(f.config);
}

std::string dump(Json const &j) { return j.dump(2) + "\n"; }

Json summary_json(OutcomeSummary const &s)
{
  return Json{{"total_surplus", s.total_surplus},
              {"revenue", s.revenue},
              {"failure_probability", s.failure_probability},
              {"sale_probabilities", s.per_round_sale_probability},
              {"expected_entrants", s.expected_entrants_per_round}};
}

Outputs cmd_solve(Flags const &f)
{
  Json const j = load_config(f);
  require_keys(j, {"primitives", "solver"}, "config");
  if (!j.contains("primitives"))
  {
    throw ConfigError("config: missing 'primitives'");
  }
  auto const p    = parse_primitives(j["primitives"], true);
  auto const opts = j.contains("solver") ? parse_solver_options(j["solver"]) : EquilibriumOptions{};
  auto const eq   = solve_equilibrium(p, opts);
  auto const s    = summarize(eq.thresholds, p);

  nlohmann::ordered_json out;
  out["thresholds"]               = std::vector<double>(eq.thresholds.v.begin() + 1, eq.thresholds.v.end());
  out["upper_bound"]              = eq.thresholds[0];
  out["reserves"]                 = p.reserves;
  out["total_surplus"]            = s.total_surplus;
  out["revenue"]                  = s.revenue;
  out["revenue_closed_form"]      = expected_revenue(eq.thresholds, p);
  out["failure_probability"]      = s.failure_probability;
  out["sale_probabilities"]       = s.per_round_sale_probability;
  out["expected_entrants"]        = s.expected_entrants_per_round;
  out["indifference_residuals"]   = eq.check.residuals;
  out["max_residual"]             = eq.check.max_residual;
  out["definition_holds"]         = eq.check.definition_holds;
  out["no_entry"]                 = eq.no_entry;
  out["start_period"]             = eq.start_period;
  out["candidates"]               = eq.candidates;
  out["multiple_equilibria"]      = eq.multiple;

  std::string csv = "T";
  for (int t = 1; t <= p.T; ++t)
  {
    csv += ",v" + std::to_string(t);
  }
  csv += "," + summary_csv_header() + "\n" + std::to_string(p.T);
  for (int t = 1; t <= p.T; ++t)
  {
    csv += "," + fmt6(eq.thresholds[t]);
  }
  csv += "," + summary_csv_row(s) + "\n";
  return {{"solve.json", out.dump(2) + "\n"}, {"solve.csv", csv}};
}

DesignOptions parse_design_options(Json const &j)
{
  require_keys(j, {"grid_points", "tol"}, "options");
  DesignOptions o;
  if (j.contains("grid_points"))
  {
    o.grid_points = get_int(j, "grid_points", "options");
  }
  if (j.contains("tol"))
  {
    o.tol = get_number(j, "tol", "options");
  }
  if (o.grid_points < 3 || !(o.tol > 0.0))
  {
    throw ConfigError("options: grid_points >= 3 and tol > 0 required");
  }
  return o;
}

std::vector<int> get_ints(Json const &obj, char const *key, std::string const &where)
{
  std::vector<int> out;
  for (double x : get_numbers(obj, key, where))
  {
    if (x != std::floor(x))
    {
      throw ConfigError(where + ": '" + key + "' must hold integers");
    }
    out.push_back(static_cast<int>(x));
  }
  return out;
}

Outputs cmd_design(Flags const &f)
{
  Json const j = load_config(f);
  require_keys(j, {"primitives", "objective", "options", "reference", "sweep"}, "config");
  if (!j.contains("primitives"))
  {
    throw ConfigError("config: missing 'primitives'");
  }
  if (!j.contains("objective") || !j["objective"].is_string())
  {
    throw ConfigError("config: 'objective' must be \"efficiency\" or \"revenue\"");
  }
  Objective obj;
  try
  {
    obj = parse_objective(j["objective"].get<std::string>());
  }
  catch (std::invalid_argument const &e)
  {
    throw ConfigError(std::string("config: ") + e.what());
  }
  auto const p    = parse_primitives(j["primitives"], false);
  auto const opts = j.contains("options") ? parse_design_options(j["options"]) : DesignOptions{};
  double const ref = j.contains("reference") ? get_number(j, "reference", "config") : 1.0;
  if (!(ref > 0.0))
  {
    throw ConfigError("config: 'reference' must be positive");
  }

  std::vector<int> sweep_N, sweep_T;
  if (j.contains("sweep"))
  {
    auto const &s = j["sweep"];
    require_keys(s, {"N", "T"}, "sweep");
    sweep_N = get_ints(s, "N", "sweep");
    sweep_T = s.contains("T") ? get_ints(s, "T", "sweep") : std::vector<int>{p.T};
    for (int n : sweep_N)
    {
      if (n < 1) throw ConfigError("sweep: N must be >= 1");
    }
    for (int t : sweep_T)
    {
      if (t < 1) throw ConfigError("sweep: T must be >= 1");
    }
  }

  auto const res = optimal_design(obj, p, opts);
  Outputs    out{{"design.json", design_to_json(res, p) + "\n"},
                 {"design.csv", design_csv_header(p.T) + "\n" + design_csv_row(res, p, ref) + "\n"}};

  std::string tr = "t,entry_cost_saving,delayed_allocation_loss,next_entry_loss,balance\n";
  for (auto const &row : design_tradeoff_report(p, res.thresholds, obj))
  {
    tr += std::to_string(row.t) + ',' + fmt6(row.entry_cost_saving) + ',' +
          fmt6(row.delayed_allocation_loss) + ',' + fmt6(row.next_entry_loss) + ',' +
          fmt6(row.balance()) + '\n';
  }
  out["tradeoff.csv"] = tr;

  if (!sweep_N.empty())
  {
    int const   tmax = *std::max_element(sweep_T.begin(), sweep_T.end());
    std::string csv  = "objective,N,T,objective_value";
    for (int t = 1; t <= tmax; ++t)
    {
      csv += ",v" + std::to_string(t);
    }
    for (int t = 1; t <= tmax; ++t)
    {
      csv += ",r" + std::to_string(t);
    }
    csv += '\n';
    for (int T : sweep_T)
    {
      for (int N : sweep_N)
      {
        auto q = p.with_horizon(T);
        q.N    = N;
        auto const r = optimal_design(obj, q, opts);
        csv += to_string(obj) + ',' + std::to_string(N) + ',' + std::to_string(T) + ',' +
               fmt6(r.objective_value);
        for (int t = 1; t <= tmax; ++t)
        {
          csv += ',' + (t <= T ? fmt6(r.thresholds[t]) : std::string());
        }
        for (int t = 1; t <= tmax; ++t)
        {
          csv += ',' + (t <= T ? fmt6(r.reserves[t - 1]) : std::string());
        }
        csv += '\n';
      }
    }
    out["design_sweep.csv"] = csv;
  }
  return out;
}

Outputs cmd_simulate(Flags const &f)
{
  Json const j = load_config(f);
  require_keys(j, {"primitives", "solver", "n_draws", "seed"}, "config");
  if (!j.contains("primitives"))
  {
    throw ConfigError("config: missing 'primitives'");
  }
  auto const p    = parse_primitives(j["primitives"], true);
  auto const opts = j.contains("solver") ? parse_solver_options(j["solver"]) : EquilibriumOptions{};
  long n_draws;
  if (f.draws)
  {
    n_draws = *f.draws;
  }
  else if (j.contains("n_draws") && j["n_draws"].is_number_integer())
  {
    n_draws = j["n_draws"].get<long>();
  }
  else
  {
    throw ConfigError("config: 'n_draws' (integer) or --draws required");
  }
  std::uint64_t seed;
  if (f.seed)
  {
    seed = *f.seed;
  }
  else if (j.contains("seed") && j["seed"].is_number_unsigned())
  {
    seed = j["seed"].get<std::uint64_t>();
  }
  else
  {
    throw ConfigError("config: 'seed' (non-negative integer) or --seed required");
  }
  if (n_draws < 0)
  {
    throw ConfigError("config: n_draws must be >= 0");
  }

  auto const         eq = solve_equilibrium(p, opts);
  std::ostringstream stream;
  auto const         est = estimate_outcomes(eq.thresholds, p, n_draws, seed, f.workers, &stream);
  Outputs            out{{"outcomes.csv", stream.str()}};
  if (n_draws == 0)
  {
    return out;
  }
  auto const s = summarize(eq.thresholds, p);
  std::ostringstream os;
  os << "# draws=" << est.n << " seed=" << seed << '\n';
  os << "metric,closed_form,monte_carlo,standard_error,z,within_3se\n";
  auto row = [&](std::string const &name, double cf, double mc, double se) {
    double const z = se > 0.0 ? (mc - cf) / se : (mc == cf ? 0.0 : HUGE_VAL);
    os << name << ',' << fmt6(cf) << ',' << fmt6(mc) << ',' << fmt6(se) << ',' << fmt6(z) << ','
       << (std::fabs(z) <= 3.0 ? "yes" : "no") << '\n';
  };
  row("total_surplus", s.total_surplus, est.surplus_mean, est.surplus_se);
  row("revenue", s.revenue, est.revenue_mean, est.revenue_se);
  row("failure_probability", s.failure_probability, est.failure_rate, est.failure_se);
  for (int t = 0; t < p.T; ++t)
  {
    row("sale_probability_" + std::to_string(t + 1), s.per_round_sale_probability[t],
        est.sale_rate[t], est.sale_se[t]);
  }
  out["summary.csv"] = os.str();
  return out;
}

Outputs cmd_reproduce(Flags const &f)
{
  if (f.target.empty())
  {
    throw ConfigError("--target is required (example1 | example2 | footnotes | counterfactual-synthetic)");
  }
  auto const targets = golden_targets();
  if (std::find(targets.begin(), targets.end(), f.target) == targets.end())
  {
    throw ConfigError("unknown reproduce target '" + f.target + "'");
  }
  Outputs out;
  std::vector<GoldenCheck> checks;
  if (f.target == "counterfactual-synthetic")
  {
    auto const sc = synthetic_counterfactual(f.draws.value_or(50), f.seed.value_or(1));
    checks        = synthetic_checks(sc);
    out["counterfactual_synthetic.csv"] = synthetic_counterfactual_csv(sc);
  }
  else
  {
    checks = golden_suite(f.target);
  }
  out["reproduce_" + f.target + ".csv"] = golden_csv(checks);
  return out;
}

Coef get_coef(Json const &j, char const *key, std::string const &where)
{
  auto const v = get_numbers(j, key, where);
  if (v.size() != 4)
  {
    throw ConfigError(where + ": '" + key + "' needs 4 coefficients");
  }
  return {v[0], v[1], v[2], v[3]};
}

HyperParams parse_hyper(Json const &j, std::string const &where)
{
  require_keys(j, {"beta_mu", "beta_sigma", "beta_K", "omega_mu", "omega_sigma", "omega_K"}, where);
  HyperParams B;
  B.beta_mu     = get_coef(j, "beta_mu", where);
  B.beta_sigma  = get_coef(j, "beta_sigma", where);
  B.beta_K      = get_coef(j, "beta_K", where);
  B.omega_mu    = get_number(j, "omega_mu", where);
  B.omega_sigma = get_number(j, "omega_sigma", where);
  B.omega_K     = get_number(j, "omega_K", where);
  try
  {
    B.validate();
  }
  catch (std::invalid_argument const &e)
  {
    throw ConfigError(where + ": " + e.what());
  }
  return B;
}

nlohmann::ordered_json hyper_json(HyperParams const &B)
{
  nlohmann::ordered_json j;
  j["beta_mu"]     = B.beta_mu;
  j["beta_sigma"]  = B.beta_sigma;
  j["beta_K"]      = B.beta_K;
  j["omega_mu"]    = B.omega_mu;
  j["omega_sigma"] = B.omega_sigma;
  j["omega_K"]     = B.omega_K;
  return j;
}

HyperParams perturbed(HyperParams const &B, double scale, std::uint64_t seed, std::uint64_t idx)
{
  auto v   = B.to_vector();
  Rng  rng = Rng::substream(seed, idx);
  for (double &x : v)
  {
    x *= rng.uniform() < 0.5 ? 1.0 - scale : 1.0 + scale;
  }
  return HyperParams::from_vector(v);
}

Outputs cmd_estimate(Flags const &f)
{
  Json const j = load_config(f);
  require_keys(j, {"model", "dataset", "generate", "fit", "B_true", "perturbation_check"}, "config");
  EstimationModel model;
  if (j.contains("model"))
  {
    auto const &m = j["model"];
    require_keys(m, {"T", "delta", "v_s"}, "model");
    if (m.contains("T")) model.T = get_int(m, "T", "model");
    if (m.contains("delta")) model.delta = get_number(m, "delta", "model");
    if (m.contains("v_s")) model.v_s = get_number(m, "v_s", "model");
    if (model.T < 1 || !(model.delta > 0.0 && model.delta <= 1.0))
    {
      throw ConfigError("model: T >= 1 and delta in (0, 1] required");
    }
  }
  if (j.contains("dataset") == j.contains("generate"))
  {
    throw ConfigError("config: exactly one of 'dataset' or 'generate' is required");
  }
  std::optional<HyperParams> B_true;
  if (j.contains("B_true"))
  {
    B_true = parse_hyper(j["B_true"], "B_true");
  }

  Outputs out;
  Dataset data;
  if (j.contains("generate"))
  {
    auto const &g = j["generate"];
    require_keys(g, {"P", "seed", "K_scale"}, "generate");
    int const P = get_int(g, "P", "generate");
    if (P < 1)
    {
      throw ConfigError("generate: P must be >= 1");
    }
    std::uint64_t const gseed = static_cast<std::uint64_t>(get_int(g, "seed", "generate"));
    GeneratorSettings   gen;
    if (g.contains("K_scale")) gen.K_scale = get_number(g, "K_scale", "generate");
    if (!B_true)
    {
      B_true = reference_hyperparams();
    }
    data = generate_synthetic(*B_true, P, gseed, gen, model);
    std::ostringstream os;
    write_dataset_csv(os, data, model.T);
    out["dataset.csv"] = os.str();
  }
  else
  {
    if (!j["dataset"].is_string())
    {
      throw ConfigError("config: 'dataset' must be a path");
    }
    auto const path = j["dataset"].get<std::string>();
    std::ifstream is(path);
    if (!is)
    {
      throw ConfigError("cannot open dataset '" + path + "'");
    }
    try
    {
      data = read_dataset_csv(is, model.T);
    }
    catch (std::invalid_argument const &e)
    {
      throw ConfigError(path + ": " + e.what());
    }
    if (data.empty())
    {
      throw ConfigError(path + ": no observations");
    }
  }

  FitSettings fs;
  fs.workers           = f.workers;
  HyperParams B0       = B_true.value_or(reference_hyperparams());
  double      b0_scale = 0.0;
  std::uint64_t b0_seed = 0;
  if (j.contains("fit"))
  {
    auto const &fj = j["fit"];
    require_keys(fj, {"S", "seed", "rounds", "average_last", "max_iter", "restarts", "B0", "B0_perturbation",
                      "B0_perturbation_seed", "cache_dir"},
                 "fit");
    if (fj.contains("S")) fs.S = get_int(fj, "S", "fit");
    if (fj.contains("seed")) fs.seed = static_cast<std::uint64_t>(get_int(fj, "seed", "fit"));
    if (fj.contains("rounds")) fs.rounds = get_int(fj, "rounds", "fit");
    if (fj.contains("average_last")) fs.average_last = get_int(fj, "average_last", "fit");
    if (fj.contains("max_iter")) fs.optimizer.max_iter = get_int(fj, "max_iter", "fit");
    if (fj.contains("restarts")) fs.optimizer.restarts = get_int(fj, "restarts", "fit");
    if (fj.contains("cache_dir"))
    {
      if (!fj["cache_dir"].is_string()) throw ConfigError("fit: 'cache_dir' must be a string");
      fs.cache_dir = fj["cache_dir"].get<std::string>();
    }
    if (fj.contains("B0")) B0 = parse_hyper(fj["B0"], "fit.B0");
    if (fj.contains("B0_perturbation")) b0_scale = get_number(fj, "B0_perturbation", "fit");
    if (fj.contains("B0_perturbation_seed"))
      b0_seed = static_cast<std::uint64_t>(get_int(fj, "B0_perturbation_seed", "fit"));
    if (fs.S < 1 || fs.rounds < 1 || fs.optimizer.max_iter < 1 || fs.optimizer.restarts < 0 ||
        !(b0_scale >= 0.0 && b0_scale < 1.0))
    {
      throw ConfigError("fit: S, rounds, max_iter >= 1, restarts >= 0, B0_perturbation in [0, 1)");
    }
  }
  if (f.seed)
  {
    fs.seed = *f.seed;
  }
  if (b0_scale > 0.0)
  {
    B0 = perturbed(B0, b0_scale, b0_seed, 0);
  }
  if (!fs.cache_dir.empty())
  {
    fs::create_directories(fs.cache_dir);
  }

  auto const res = fit(data, B0, fs, model);

  nlohmann::ordered_json fj;
  fj["observations"]    = data.size();
  fj["S"]               = fs.S;
  fj["rounds"]          = fs.rounds;
  fj["B0"]              = hyper_json(B0);
  fj["B_fitted"]        = hyper_json(res.B);
  fj["loglik"]          = res.loglik;
  fj["loglik_trace"]    = res.trace;
  fj["converged"]       = res.converged;
  fj["iterations"]      = res.iterations;
  fj["floored"]         = res.floored;
  fj["solver_failures"] = res.solver_failures;
  fj["ess_mean"]        = res.ess_mean;
  fj["ess_min"]         = res.ess_min;
  auto const im         = implied_means(res.B, data, model);
  fj["implied_means"]   = {{"mu", im.mu}, {"sigma", im.sigma}, {"K", im.K}};
  out["fit.json"]       = fj.dump(2) + "\n";

  if (B_true)
  {
    auto const         it = implied_means(*B_true, data, model);
    std::ostringstream os;
    os << "quantity,generating,fitted,relative_error,within_10pct\n";
    auto row = [&](char const *name, double a, double b) {
      double const rel = std::fabs(b - a) / std::fabs(a);
      os << name << ',' << fmt6(a) << ',' << fmt6(b) << ',' << fmt6(rel) << ','
         << (rel <= 0.10 ? "yes" : "no") << '\n';
    };
    row("mean_mu", it.mu, im.mu);
    row("mean_sigma", it.sigma, im.sigma);
    row("mean_K", it.K, im.K);
    out["recovery.csv"] = os.str();
  }

  if (j.contains("perturbation_check"))
  {
    if (!B_true)
    {
      throw ConfigError("perturbation_check needs generating hyper-parameters");
    }
    auto const &pc = j["perturbation_check"];
    require_keys(pc, {"count", "scale", "seed", "S"}, "perturbation_check");
    int const    count = pc.contains("count") ? get_int(pc, "count", "perturbation_check") : 20;
    double const scale = pc.contains("scale") ? get_number(pc, "scale", "perturbation_check") : 0.2;
    auto const   pseed = static_cast<std::uint64_t>(
        pc.contains("seed") ? get_int(pc, "seed", "perturbation_check") : 1);
    int const S = pc.contains("S") ? get_int(pc, "S", "perturbation_check") : fs.S;
    if (count < 1 || S < 1 || !(scale > 0.0 && scale < 1.0))
    {
      throw ConfigError("perturbation_check: count, S >= 1 and scale in (0, 1) required");
    }
    auto const   bank = precompute_draws(*B_true, data, S, mix64(pseed), model, f.workers);
    double const base = simulated_loglik(*B_true, data, bank, model);
    std::ostringstream os;
    os << "# loglik_at_generating=" << fmt_exact(base) << '\n';
    os << "probe,loglik,below_generating\n";
    for (int k = 0; k < count; ++k)
    {
      double const ll = simulated_loglik(perturbed(*B_true, scale, pseed, k + 1), data, bank, model);
      os << k + 1 << ',' << fmt_exact(ll) << ',' << (ll < base ? "yes" : "no") << '\n';
    }
    out["perturbation.csv"] = os.str();
  }
  return out;
}

void write_outputs(Outputs const &out, std::string const &dir)
{
  fs::create_directories(dir);
  std::vector<fs::path> staged;
  for (auto const &[name, body] : out)
  {
    fs::path const tmp = fs::path(dir) / ("." + name + ".tmp");
    std::ofstream  os(tmp, std::ios::binary);
    os << body;
    if (!os)
    {
      for (auto const &p : staged)
      {
        fs::remove(p);
      }
      throw std::runtime_error("cannot write '" + tmp.string() + "'");
    }
    staged.push_back(tmp);
  }
  for (auto const &[name, body] : out)
  {
    fs::rename(fs::path(dir) / ("." + name + ".tmp"), fs::path(dir) / name);
  }
}

}  // namespace

int run(int argc, char const *const *argv)
{
  CLI::App app{"Recurring auction solver, designer, simulator and estimator"};
  app.require_subcommand(1);
  Flags f;
  std::uint64_t seed  = 0;
  long          draws = 0;

  auto add_common = [&](CLI::App *sc) {
    sc->add_option("--config", f.config, "JSON configuration file");
    sc->add_option("--out", f.out, "Output directory");
    sc->add_option("--seed", seed, "Random seed")->each([&](std::string const &) { f.seed = seed; });
    sc->add_option("--draws", draws, "Monte Carlo draws")->each([&](std::string const &) {
      f.draws = draws;
    });
    sc->add_option("--workers", f.workers, "Worker threads")->check(CLI::PositiveNumber);
  };
  auto *solve     = app.add_subcommand("solve", "Equilibrium thresholds and outcome summary");
  auto *design    = app.add_subcommand("design", "Efficiency- or revenue-maximizing reserves");
  auto *simulate  = app.add_subcommand("simulate", "Monte Carlo outcome stream with closed-form report");
  auto *reproduce = app.add_subcommand("reproduce", "Golden-value suites");
  auto *estimate  = app.add_subcommand("estimate", "Simulated maximum likelihood fit");
  for (auto *sc : {solve, design, simulate, reproduce, estimate})
  {
    add_common(sc);
  }
  reproduce->add_option("--target", f.target, "example1 | example2 | footnotes | counterfactual-synthetic");

  try
  {
    app.parse(argc, argv);
  }
  catch (CLI::CallForHelp const &e)
  {
    return app.exit(e);
  }
  catch (CLI::ParseError const &e)
  {
    app.exit(e);
    return kConfigError;
  }

  try
  {
    Outputs out;
    if (solve->parsed()) out = cmd_solve(f);
    else if (design->parsed()) out = cmd_design(f);
    else if (simulate->parsed()) out = cmd_simulate(f);
    else if (estimate->parsed()) out = cmd_estimate(f);
    else out = cmd_reproduce(f);
    write_outputs(out, f.out);

    if (reproduce->parsed())
    {
      auto const &csv = out.at("reproduce_" + f.target + ".csv");
      std::cout << csv;
      if (csv.find(",FAIL\n") != std::string::npos)
      {
        std::cerr << "golden check failed for target '" << f.target << "'\n";
        return kGoldenFailure;
      }
    }
    return kOk;
  }
  catch (ConfigError const &e)
  {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  catch (std::invalid_argument const &e)
  {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  catch (NoEntryCorner const &e)
  {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  }
  catch (SolverError const &e)
  {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  }
  catch (std::domain_error const &e)
  {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kSolverFailure;
  }
  catch (std::exception const &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return kSolverFailure;
  }
}

}  // namespace recauction::cli
