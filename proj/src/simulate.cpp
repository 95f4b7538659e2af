#include "recauction/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <thread>

#include "recauction/io.hpp"

namespace recauction {

AuctionOutcome play_auction(std::vector<double> const &values, ThresholdSequence const &thr,
                            AuctionPrimitives const &p)
{
  AuctionOutcome o;
  o.entrants_per_round.assign(static_cast<std::size_t>(thr.T()), 0);
  double cost = 0.0;
  for (int t = 1; t <= thr.T(); ++t)
  {
    double const lo  = thr[t];
    double const hi  = thr[t - 1];
    double       top = -HUGE_VAL;
    double       sec = -HUGE_VAL;
    int          k   = 0;
    for (double v : values)
    {
      if (v > lo && v <= hi)
      {
        ++k;
        if (v > top)
        {
          sec = top;
          top = v;
        }
        else if (v > sec)
        {
          sec = v;
        }
      }
    }
    o.entrants_per_round[t - 1] = k;
    double const disc           = p.discount(t);
    cost += disc * k * p.K;
    if (k == 0)
    {
      continue;
    }
    o.sold           = true;
    o.round          = t;
    o.winner_value   = top;
    o.price          = k == 1 ? p.reserve(t) : sec;
    o.surplus_sample = disc * (top - p.v_s) - cost + p.v_s;
    o.revenue_sample = disc * (o.price - p.v_s);
    return o;
  }
  o.surplus_sample = p.v_s - cost;
  return o;
}

AuctionOutcome simulate_auction(ThresholdSequence const &thr, AuctionPrimitives const &p, Rng &rng)
{
  std::vector<double> values(static_cast<std::size_t>(p.N));
  for (double &v : values)
  {
    v = p.dist.sample(rng);
  }
  return play_auction(values, thr, p);
}

namespace {

constexpr long kBlock = 4096;

struct Block
{
  long              n = 0;
  double            ts = 0.0, ts2 = 0.0, rev = 0.0, rev2 = 0.0;
  long              fail = 0;
  std::vector<long> sold;
  std::vector<long> counts;  // T x (N+1)

  void add(AuctionOutcome const &o, int N)
  {
    ++n;
    ts += o.surplus_sample;
    ts2 += o.surplus_sample * o.surplus_sample;
    rev += o.revenue_sample;
    rev2 += o.revenue_sample * o.revenue_sample;
    if (o.sold)
    {
      ++sold[o.round - 1];
    }
    else
    {
      ++fail;
    }
    int const reached = o.sold ? o.round : static_cast<int>(o.entrants_per_round.size());
    for (int t = 1; t <= reached; ++t)
    {
      ++counts[(t - 1) * (N + 1) + o.entrants_per_round[t - 1]];
    }
  }

  void merge(Block const &b)
  {
    n += b.n;
    ts += b.ts;
    ts2 += b.ts2;
    rev += b.rev;
    rev2 += b.rev2;
    fail += b.fail;
    for (std::size_t i = 0; i < sold.size(); ++i)
    {
      sold[i] += b.sold[i];
    }
    for (std::size_t i = 0; i < counts.size(); ++i)
    {
      counts[i] += b.counts[i];
    }
  }
};

Block reduce(std::vector<Block> &blocks, std::size_t lo, std::size_t hi)
{
  if (hi - lo == 1)
  {
    return blocks[lo];
  }
  std::size_t const mid = lo + (hi - lo) / 2;
  Block             a   = reduce(blocks, lo, mid);
  a.merge(reduce(blocks, mid, hi));
  return a;
}

double standard_error(double sum, double sum2, long n)
{
  if (n < 2)
  {
    return 0.0;
  }
  double const var = std::max(0.0, (sum2 - sum * sum / n) / (n - 1));
  return std::sqrt(var / n);
}

}  // namespace

OutcomeEstimate estimate_outcomes(ThresholdSequence const &thr, AuctionPrimitives const &p,
                                  long n_draws, std::uint64_t seed, int workers,
                                  std::ostream *stream)
{
  int const       T = thr.T();
  OutcomeEstimate est;
  est.sale_rate.assign(T, 0.0);
  est.sale_se.assign(T, 0.0);
  est.entrant_counts.assign(T, std::vector<long>(static_cast<std::size_t>(p.N) + 1, 0));
  if (stream)
  {
    write_outcome_csv_header(*stream, T);
  }
  if (n_draws <= 0)
  {
    return est;
  }

  std::size_t const  nblocks = static_cast<std::size_t>((n_draws + kBlock - 1) / kBlock);
  std::vector<Block> blocks(nblocks);
  std::vector<std::vector<AuctionOutcome>> kept(stream ? nblocks : 0);

  auto run_block = [&](std::size_t b) {
    Block blk;
    blk.sold.assign(T, 0);
    blk.counts.assign(static_cast<std::size_t>(T) * (p.N + 1), 0);
    long const first = static_cast<long>(b) * kBlock;
    long const last  = std::min(n_draws, first + kBlock);
    for (long i = first; i < last; ++i)
    {
      Rng  rng = Rng::substream(seed, static_cast<std::uint64_t>(i));
      auto o   = simulate_auction(thr, p, rng);
      blk.add(o, p.N);
      if (stream)
      {
        kept[b].push_back(std::move(o));
      }
    }
    blocks[b] = std::move(blk);
  };

  int const nw = std::max(1, std::min<int>(workers, static_cast<int>(nblocks)));
  if (nw == 1)
  {
    for (std::size_t b = 0; b < nblocks; ++b)
    {
      run_block(b);
    }
  }
  else
  {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < nw; ++w)
    {
      pool.emplace_back([&] {
        for (std::size_t b; (b = next.fetch_add(1)) < nblocks;)
        {
          run_block(b);
        }
      });
    }
    for (auto &th : pool)
    {
      th.join();
    }
  }

  if (stream)
  {
    long id = 0;
    for (auto const &blk : kept)
    {
      for (auto const &o : blk)
      {
        write_outcome_csv_row(*stream, id++, o);
      }
    }
  }

  Block const all  = reduce(blocks, 0, nblocks);
  double const n   = static_cast<double>(all.n);
  est.n            = all.n;
  est.surplus_mean = all.ts / n;
  est.surplus_se   = standard_error(all.ts, all.ts2, all.n);
  est.revenue_mean = all.rev / n;
  est.revenue_se   = standard_error(all.rev, all.rev2, all.n);
  est.failure_rate = all.fail / n;
  est.failure_se   = std::sqrt(est.failure_rate * (1.0 - est.failure_rate) / n);
  for (int t = 0; t < T; ++t)
  {
    est.sale_rate[t] = all.sold[t] / n;
    est.sale_se[t]   = std::sqrt(est.sale_rate[t] * (1.0 - est.sale_rate[t]) / n);
    for (int k = 0; k <= p.N; ++k)
    {
      est.entrant_counts[t][k] = all.counts[static_cast<std::size_t>(t) * (p.N + 1) + k];
    }
  }
  return est;
}

void write_outcome_csv_header(std::ostream &os, int T)
{
  os << "id,sold,round,price,winner_value";
  for (int t = 1; t <= T; ++t)
  {
    os << ",entrants_" << t;
  }
  os << ",surplus,revenue\n";
}

void write_outcome_csv_row(std::ostream &os, long id, AuctionOutcome const &o)
{
  os << id << ',' << (o.sold ? 1 : 0) << ',' << o.round << ',' << fmt6(o.price) << ','
     << fmt6(o.winner_value);
  for (int k : o.entrants_per_round)
  {
    os << ',' << k;
  }
  os << ',' << fmt6(o.surplus_sample) << ',' << fmt6(o.revenue_sample) << '\n';
}

}  // namespace recauction
