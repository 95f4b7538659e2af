#include <ostream>

#include "recauction/design.hpp"
#include "recauction/io.hpp"
#include "recauction/outcomes.hpp"

namespace recauction {

std::string to_string(CounterfactualMode m)
{
  switch (m)
  {
  case CounterfactualMode::TruncateT:
    return "truncate-T";
  case CounterfactualMode::OptimalReserves:
    return "optimal-reserves";
  case CounterfactualMode::EntryCostScale:
    return "entry-cost-scale";
  }
  return "?";
}

CounterfactualMode parse_counterfactual_mode(std::string const &s)
{
  for (auto m : {CounterfactualMode::TruncateT, CounterfactualMode::OptimalReserves,
                 CounterfactualMode::EntryCostScale})
  {
    if (to_string(m) == s)
    {
      return m;
    }
  }
  throw std::invalid_argument("unknown counterfactual mode '" + s + "'");
}

namespace {

CounterfactualRow observed_row(AuctionPrimitives const &q, double scale, EquilibriumOptions const &eo)
{
  CounterfactualRow row;
  row.T          = q.T;
  row.cost_scale = scale;
  row.policy     = "observed";
  row.thresholds = solve_equilibrium(q, eo).thresholds;
  row.reserves   = q.reserves;
  row.summary    = summarize(row.thresholds, q);
  return row;
}

}  // namespace

std::vector<CounterfactualRow> counterfactual_table(AuctionPrimitives const &p,
                                                    CounterfactualMode           mode,
                                                    CounterfactualSettings const &settings)
{
  std::vector<int> horizons = settings.horizons;
  if (horizons.empty())
  {
    for (int t = 1; t <= p.T; ++t)
    {
      horizons.push_back(t);
    }
  }
  std::vector<CounterfactualRow> rows;
  switch (mode)
  {
  case CounterfactualMode::TruncateT:
    for (int T : horizons)
    {
      rows.push_back(observed_row(p.with_horizon(T), 1.0, settings.solver));
    }
    break;
  case CounterfactualMode::OptimalReserves:
    for (int T : horizons)
    {
      AuctionPrimitives const q = p.with_horizon(T);
      for (auto o : {Objective::Efficiency, Objective::Revenue})
      {
        auto const        d = optimal_design(o, q);
        CounterfactualRow row;
        row.T          = T;
        row.policy     = to_string(o);
        row.thresholds = d.thresholds;
        row.reserves   = d.reserves;
        row.summary    = summarize(d.thresholds, q.with_reserves(d.reserves));
        rows.push_back(std::move(row));
      }
    }
    break;
  case CounterfactualMode::EntryCostScale:
    for (double s : settings.cost_scales)
    {
      for (int T : horizons)
      {
        AuctionPrimitives q = p.with_horizon(T);
        q.K *= s;
        rows.push_back(observed_row(q, s, settings.solver));
      }
    }
    break;
  }
  return rows;
}

void write_counterfactual_csv(std::ostream &os, CounterfactualMode mode,
                              CounterfactualSettings const &settings,
                              std::vector<CounterfactualRow> const &rows)
{
  std::vector<double> h(settings.horizons.begin(), settings.horizons.end());
  os << "# mode=" << to_string(mode) << " horizons=" << (h.empty() ? "all" : join6(h, ';'));
  if (mode == CounterfactualMode::EntryCostScale)
  {
    os << " cost_scales=" << join6(settings.cost_scales, ';');
  }
  os << '\n' << "T,cost_scale,policy,thresholds,reserves," << summary_csv_header() << '\n';
  for (auto const &r : rows)
  {
    std::vector<double> v(r.thresholds.v.begin() + 1, r.thresholds.v.end());
    os << r.T << ',' << fmt6(r.cost_scale) << ',' << r.policy << ',' << join6(v, ';') << ','
       << join6(r.reserves, ';') << ',' << summary_csv_row(r.summary) << '\n';
  }
}

}  // namespace recauction
