#ifndef CODETUNE_RNG_HPP
#define CODETUNE_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace codetune {

/// Default seed used by every entry point that does not receive one, so that
/// all runs are reproducible unless the caller opts out.
inline constexpr std::uint64_t kDefaultSeed = 20200101u;

/// Mixes a stream id into a base seed (splitmix64 finalizer). Distinct ids
/// give statistically independent substreams of the same base seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream_id);

/// Folds a path of stream ids into one seed, e.g. (base, {cell, rep, phase}).
std::uint64_t mix_seed_path(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

/// Deterministic random stream. Identical (seed, stream_id) pairs reproduce
/// identical sequences; the uniform and normal transforms are implemented here
/// rather than with std distributions, whose output is implementation-defined.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : engine_(mix_seed(seed, stream_id)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform draw in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via the polar method (one spare value cached).
  double normal();

  /// Uniform integer in [0, n), n >= 1.
  std::uint64_t uniform_index(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace codetune

#endif
