#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

namespace fusemean {

//! Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as
//! easy as 1, 2, 3"). Maps a 128-bit counter and 64-bit key to 128 bits.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key);

//! Counter-based stream. The key is the user seed and the upper half of the
//! counter is the stream id, so every (seed, stream) pair is an independent
//! sequence that can be created on any thread without shared state.
class CounterRng
{
public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max()
  {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();

  //! Uniform on [0, 1) with 53 random bits.
  double uniform();

  //! Uniform integer on [0, bound), bound > 0. Lemire's multiply-shift
  //! with rejection, so the result is unbiased and platform independent.
  std::uint64_t bounded(std::uint64_t bound);

  //! Standard normal via Box-Muller; the second variate of each pair is
  //! cached.
  double normal();

private:
  std::uint32_t next_u32();

  PhiloxKey key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  PhiloxCounter buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

//! Stream id for sub-stream `purpose` of replication `replication`.
std::uint64_t stream_id(std::uint64_t replication, std::uint64_t purpose);

//! Fisher-Yates shuffle of 0..n-1 driven by `rng`.
std::vector<std::size_t> shuffled_indices(std::size_t n, CounterRng& rng);

} // namespace fusemean
