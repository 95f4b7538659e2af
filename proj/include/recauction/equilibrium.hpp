#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "recauction/distributions.hpp"

namespace recauction {

/// One recurring-auction environment. `reserves[t-1]` is r_t.
struct AuctionPrimitives
{
  ValueDistribution   dist;
  int                 N     = 2;
  int                 T     = 1;
  double              delta = 0.95;
  double              v_s   = 0.0;
  double              K     = 0.0;
  std::vector<double> reserves;

  /// Throws std::invalid_argument on malformed primitives.
  void validate() const;

  /// G(v) = F(v)^(N-1), the law of the highest rival value.
  double G(double v) const { return dist.order_stat_cdf(N - 1, v); }
  /// g(v) = dG/dv.
  double g(double v) const;
  double reserve(int t) const { return reserves.at(t - 1); }
  double discount(int t) const;

  /// Copy with a different horizon; reserves are prefix-truncated or padded
  /// with the last entry.
  AuctionPrimitives with_horizon(int T_new) const;
  AuctionPrimitives with_reserves(std::vector<double> r) const;
};

/// Entry cutoffs v_0..v_T with v_0 = upper support bound.
struct ThresholdSequence
{
  std::vector<double> v;

  int    T() const { return static_cast<int>(v.size()) - 1; }
  double operator[](int t) const { return v.at(t); }
  /// Period t skipped: nobody enters because v_t = v_{t-1}.
  bool skipped(int t) const { return !(v.at(t - 1) > v.at(t)); }

  /// Throws std::invalid_argument unless v_0 = hi >= v_1 >= ... >= v_T >= lo.
  void validate(double lo, double hi) const;

  /// All cutoffs at the top of the support: nobody ever enters.
  static ThresholdSequence no_entry(int T, double hi);
};

/// Numerical failure of the equilibrium solver.
class SolverError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Even type v_bar cannot profitably enter any round.
class NoEntryCorner : public std::runtime_error
{
public:
  explicit NoEntryCorner(ThresholdSequence thr)
    : std::runtime_error("no-entry corner: v_1 = upper support bound")
    , thresholds(std::move(thr))
  {}
  ThresholdSequence thresholds;
};

struct EquilibriumOptions
{
  int    grid_points  = 512;
  double tol          = 1e-10;  // refinement width on the shooting variable
  double residual_tol = 1e-8;   // indifference residual, value units
  /// false: scan top-down and stop at the first verified root (which is the
  /// selected one anyway); multiplicity is then not reported.
  bool scan_all = true;
};

/// Per-period verification of a threshold sequence.
struct EquilibriumCheck
{
  std::vector<double> residuals;    // [t-1]; 0 at skipped periods
  std::vector<double> deviation;    // [t-1]; max_{tau>t} Pi_tau(v_t) - Pi_t(v_t)
  double              max_residual = 0.0;
  bool                definition_holds = true;
};

struct EquilibriumResult
{
  ThresholdSequence   thresholds;
  bool                no_entry = false;
  int                 start_period = 1;
  std::vector<double> candidates;  // verified roots of the shooting variable
  bool                multiple = false;
  EquilibriumCheck    check;
  long                evaluations = 0;
};

/// Unconditional interim payoff of type v entering in round t.
double interim_payoff(double v, int t, ThresholdSequence const &thr, AuctionPrimitives const &p);

EquilibriumCheck check_equilibrium(ThresholdSequence const &thr, AuctionPrimitives const &p,
                                   double tol = 1e-8);

/// Symmetric equilibrium with diagnostics. No-entry corners are returned
/// with `no_entry` set; throws SolverError when no verified root exists.
EquilibriumResult solve_equilibrium(AuctionPrimitives const &p, EquilibriumOptions const &opts = {});

/// As solve_equilibrium but throws NoEntryCorner in the corner.
ThresholdSequence solve_thresholds(AuctionPrimitives const &p, EquilibriumOptions const &opts = {});

/// Reserve sequence inducing `thr` (prims.reserves ignored). Throws
/// std::domain_error when G(v_t) = 0.
std::vector<double> reserves_from_thresholds(ThresholdSequence const &thr,
                                             AuctionPrimitives const &p);

/// argmax_t Pi_t(v); 0 means never enter.
int best_entry_time(double v, ThresholdSequence const &thr, AuctionPrimitives const &p);

}  // namespace recauction
