#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "recauction/equilibrium.hpp"
#include "recauction/random.hpp"

namespace recauction {

struct AuctionOutcome
{
  bool             sold  = false;
  int              round = 0;  // 0 when unsold
  double           price = std::nan("");
  double           winner_value = std::nan("");
  std::vector<int> entrants_per_round;
  double           surplus_sample = 0.0;
  double           revenue_sample = 0.0;
};

/// Play out the recurring auction for given buyer values under the cutoff
/// strategies `thr`. Buyers with values in (v_t, v_{t-1}] enter in round t.
AuctionOutcome play_auction(std::vector<double> const &values, ThresholdSequence const &thr,
                            AuctionPrimitives const &p);

/// Draw N values from p.dist and play.
AuctionOutcome simulate_auction(ThresholdSequence const &thr, AuctionPrimitives const &p, Rng &rng);

struct OutcomeEstimate
{
  long                n = 0;
  double              surplus_mean = 0.0, surplus_se = 0.0;
  double              revenue_mean = 0.0, revenue_se = 0.0;
  double              failure_rate = 0.0, failure_se = 0.0;
  std::vector<double> sale_rate, sale_se;  // [t-1]
  /// entrant_counts[t-1][k]: auctions reaching round t with k entrants.
  std::vector<std::vector<long>> entrant_counts;
};

/// Monte Carlo means over n_draws auctions. Draw i uses the substream
/// (seed, i); blocks are reduced pairwise in index order, so the result is
/// bit-identical for every worker count. When `stream` is set, one CSV row
/// per auction is written in draw order.
OutcomeEstimate estimate_outcomes(ThresholdSequence const &thr, AuctionPrimitives const &p,
                                  long n_draws, std::uint64_t seed, int workers = 1,
                                  std::ostream *stream = nullptr);

void write_outcome_csv_header(std::ostream &os, int T);
void write_outcome_csv_row(std::ostream &os, long id, AuctionOutcome const &o);

}  // namespace recauction
