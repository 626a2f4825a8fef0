#pragma once

#include <array>
#include <cstdint>

namespace condstable {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3"). Pure function of (counter, key).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key);

std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based random stream identified by (seed, stream_index).
///
/// The seed is the Philox key and the stream index occupies the upper half of
/// the counter, so distinct pairs address disjoint counter blocks. Draws are a
/// pure function of (seed, stream_index, number of draws so far), which is what
/// makes replicate-parallel runs independent of the worker count.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_index);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_index() const noexcept { return stream_; }

  /// Derived stream for replicate / purpose `i`; same seed, hashed index.
  RngStream child(std::uint64_t i) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  /// Standard exponential.
  double exponential();
  /// Standard normal (Box-Muller, second variate cached).
  double normal();

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int pos_ = 4;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace condstable
