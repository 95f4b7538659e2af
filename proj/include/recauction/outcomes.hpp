#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "recauction/equilibrium.hpp"

namespace recauction {

/// Thrown when the virtual value fails to be monotone where a
/// revenue-optimal cutoff is sought.
class NonRegularError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

/// psi weakly increasing at `points` quantile-spaced nodes of [a, b]
/// (nodes where the density vanishes are skipped).
bool virtual_value_increasing(ValueDistribution const &d, double a, double b, int points = 1000);

struct OutcomeSummary
{
  double              total_surplus       = 0.0;
  double              revenue             = 0.0;
  double              failure_probability = 0.0;
  std::vector<double> per_round_sale_probability;
  std::vector<double> expected_entrants_per_round;
};

/// Expected total surplus, counting the seller's value v_s when unsold.
double expected_surplus(ThresholdSequence const &thr, AuctionPrimitives const &p);

/// Seller profit over v_s as a function of thresholds alone, with the
/// reserves that induce them substituted out.
double expected_revenue(ThresholdSequence const &thr, AuctionPrimitives const &p);

/// Seller profit over v_s using the announced reserves p.reserves.
double expected_revenue_given_reserves(ThresholdSequence const &thr, AuctionPrimitives const &p);

double              failure_probability(ThresholdSequence const &thr, AuctionPrimitives const &p);
std::vector<double> sale_probabilities(ThresholdSequence const &thr, AuctionPrimitives const &p);
std::vector<double> expected_entrants(ThresholdSequence const &thr, AuctionPrimitives const &p);

/// Discounted expected payoff summed over all buyers (entry costs included).
double expected_buyer_rents(ThresholdSequence const &thr, AuctionPrimitives const &p);

/// Full summary; revenue uses the announced reserves.
OutcomeSummary summarize(ThresholdSequence const &thr, AuctionPrimitives const &p);

/// Root of (v - r) G(v) = K on [max(r, v_lo), v_hi]; v_hi when none.
double single_round_cutoff(AuctionPrimitives const &p, double r);

struct SingleRoundEfficient
{
  double cutoff;
  double surplus;
};
SingleRoundEfficient single_round_efficient(AuctionPrimitives const &p);

struct SingleRoundRevenue
{
  double cutoff;
  double reserve;
  double revenue;
};
/// Throws NonRegularError when psi is not monotone on the search interval.
SingleRoundRevenue single_round_revenue_optimal(AuctionPrimitives const &p);

/// Cutoff of a buyer whose single rival always enters: c with
/// integral_{v_lo}^{c} (c - x) dF(x) = K.
double always_enter_partner_cutoff(ValueDistribution const &d, double K);

struct DuopolyOutcome
{
  double surplus;
  double revenue;
  double expected_entrants;
};
/// Two buyers entering on cutoffs c1 <= c2, highest entrant wins. Seller
/// profit is the expected virtual value of the winner net of entry rents
/// (each marginal type left with zero), i.e. E[psi(w) - v_s] - K E[entrants].
DuopolyOutcome asymmetric_duopoly_single_round(AuctionPrimitives const &p, double c1, double c2);

enum class CounterfactualMode
{
  TruncateT,
  OptimalReserves,
  EntryCostScale
};

std::string        to_string(CounterfactualMode m);
CounterfactualMode parse_counterfactual_mode(std::string const &s);

struct CounterfactualSettings
{
  std::vector<int>    horizons;                    // empty: 1..T
  std::vector<double> cost_scales{0.9, 1.0, 1.1};  // EntryCostScale only
  EquilibriumOptions  solver;
};

struct CounterfactualRow
{
  int                 T          = 1;
  double              cost_scale = 1.0;
  std::string         policy;  // observed | efficiency | revenue
  ThresholdSequence   thresholds;
  std::vector<double> reserves;
  OutcomeSummary      summary;
};

std::vector<CounterfactualRow> counterfactual_table(AuctionPrimitives const &p,
                                                    CounterfactualMode           mode,
                                                    CounterfactualSettings const &settings = {});

/// CSV rendering; the table header names the mode and its settings.
std::string summary_csv_header();
std::string summary_csv_row(OutcomeSummary const &s);
void write_counterfactual_csv(std::ostream &os, CounterfactualMode mode,
                              CounterfactualSettings const &settings,
                              std::vector<CounterfactualRow> const &rows);

}  // namespace recauction
