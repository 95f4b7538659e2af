#pragma once

#include <cstdint>
#include <random>

namespace recauction {

/// SplitMix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Caller-owned random state. Uniforms are built from the raw 64-bit output
/// so streams are reproducible independent of the standard library's
/// distribution implementations.
class Rng
{
public:
  explicit Rng(std::uint64_t seed)
    : engine_(mix64(seed))
  {}

  /// Substream keyed by (seed, index); identical for any schedule.
  static Rng substream(std::uint64_t seed, std::uint64_t index)
  {
    return Rng(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
  }

  /// Uniform on the open interval (0, 1).
  double uniform()
  {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64 &engine() { return engine_; }

private:
  std::mt19937_64 engine_;
};

}  // namespace recauction
