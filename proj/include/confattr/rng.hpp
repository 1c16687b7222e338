#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace confattr {

/// Philox4x32-10 block function: maps (counter, key) to four 32-bit words.
/// Salmon et al., "Parallel random numbers: as easy as 1, 2, 3" (SC 2011).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// Stable 64-bit id for a named stream.
std::uint64_t stream_id(std::string_view name, std::uint64_t index = 0);

/// Counter-based random stream keyed by (seed, stream). Output i of a stream
/// depends only on (seed, stream, i), so streams never perturb each other and
/// any stream can be split off without consuming draws from another.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  /// Uniform in the open interval (0, 1), 53-bit resolution.
  double uniform();
  /// Standard normal via Box-Muller.
  double normal();
  bool bernoulli(double prob) { return uniform() < prob; }
  /// Uniform integer in [0, bound) without modulo bias.
  std::uint64_t below(std::uint64_t bound);

  /// Independent child stream.
  RandomStream split(std::uint64_t child) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  bool have_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace confattr
