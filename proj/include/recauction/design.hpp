#pragma once

#include <string>
#include <vector>

#include "recauction/outcomes.hpp"

namespace recauction {

enum class Objective
{
  Efficiency,
  Revenue
};

std::string to_string(Objective o);
/// Throws std::invalid_argument for anything but "efficiency" / "revenue".
Objective parse_objective(std::string const &s);

struct DesignResult
{
  Objective           objective = Objective::Efficiency;
  ThresholdSequence   thresholds;
  std::vector<double> reserves;
  double              objective_value = 0.0;
  std::vector<double> foc_residuals;  // [t-1], t = 1..T
  bool                regular   = true;  // psi increasing over the search region
  int                 candidates = 0;
};

struct DesignOptions
{
  int    grid_points = 512;
  double tol         = 4e-16;  // relative bracket width on v1
};

/// Residual of the designer's first-order condition at period t, with the
/// allocation value val(v) = v (efficiency) or psi(v) (revenue).
double foc_residual(Objective o, ThresholdSequence const &thr, AuctionPrimitives const &p, int t);
std::vector<double> foc_residuals(Objective o, ThresholdSequence const &thr,
                                  AuctionPrimitives const &p);

/// Design objective evaluated at thresholds, reserves substituted out.
double design_objective(Objective o, ThresholdSequence const &thr, AuctionPrimitives const &p);

DesignResult optimal_design(Objective o, AuctionPrimitives const &p, DesignOptions const &opts = {});
inline DesignResult efficient_design(AuctionPrimitives const &p, DesignOptions const &opts = {})
{
  return optimal_design(Objective::Efficiency, p, opts);
}
inline DesignResult revenue_design(AuctionPrimitives const &p, DesignOptions const &opts = {})
{
  return optimal_design(Objective::Revenue, p, opts);
}

struct TradeoffRow
{
  int    t;
  double entry_cost_saving;
  double delayed_allocation_loss;
  double next_entry_loss;
  double balance() const { return entry_cost_saving - delayed_allocation_loss - next_entry_loss; }
};

/// Per-period decomposition of the efficiency condition, one row per t < T.
std::vector<TradeoffRow> design_tradeoff_report(AuctionPrimitives const &p,
                                                ThresholdSequence const &thr,
                                                Objective o = Objective::Efficiency);

struct PerturbationReport
{
  double max_gain = 0.0;  // largest objective increase over all probes
  int    worst_t  = 0;
  int    probes   = 0;
};

/// Shift each v_t by +/-eps (re-projected onto monotone sequences) and
/// record the largest objective improvement.
PerturbationReport perturbation_check(DesignResult const &res, AuctionPrimitives const &p,
                                      double eps = 1e-3);

std::string design_to_json(DesignResult const &res, AuctionPrimitives const &p);
std::string design_csv_header(int T);
/// Reserve fractions r_t / reference alongside thresholds.
std::string design_csv_row(DesignResult const &res, AuctionPrimitives const &p,
                           double reference = 1.0);

}  // namespace recauction
