#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include "regen/error.hpp"

namespace regen {

/// Philox4x32-10 block function (Salmon et al., Random123).
///
/// Maps a 128-bit counter and a 64-bit key to 128 pseudo-random bits.
/// Stateless, so any block of any stream can be computed independently.
inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

/// Tags separating the purposes a replication may draw randomness for.
enum class StreamTag : std::uint32_t {
  kGeneric = 0,
  kReplication = 1,
  kCycles = 2,
  kConstants = 3,
  kCounting = 4,
  kForward = 5,
  kRetrospective = 6,
};

/// Counter-based random stream keyed on (seed, index, tag).
///
/// Satisfies UniformRandomBitGenerator with 64-bit output. Two streams with
/// different keys never share blocks, and the sequence of a stream does not
/// depend on how many other streams were drawn from before it.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t seed, std::uint32_t index = 0,
                  StreamTag tag = StreamTag::kGeneric)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        index_(index),
        tag_(static_cast<std::uint32_t>(tag)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (lane_ == 2) refill();
    return buffer_[lane_++];
  }

  /// Uniform draw on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Exponential draw with the given rate (ziggurat).
  double exponential(double rate = 1.0) {
    return boost::random::exponential_distribution<double>(rate)(*this);
  }

  /// Standard normal draw (ziggurat).
  double normal() { return boost::random::normal_distribution<double>()(*this); }

  std::uint64_t blocks_used() const { return block_; }

 private:
  void refill() {
    const auto out = philox4x32_10({static_cast<std::uint32_t>(block_),
                                    static_cast<std::uint32_t>(block_ >> 32), index_, tag_},
                                   key_);
    ++block_;
    buffer_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    buffer_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    lane_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint32_t index_;
  std::uint32_t tag_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int lane_ = 2;
};

/// Stream for replication `index` of an experiment seeded with `master_seed`.
inline Stream replication_stream(std::uint64_t master_seed, std::uint64_t index,
                                 StreamTag tag = StreamTag::kReplication) {
  if (index > std::numeric_limits<std::uint32_t>::max()) {
    throw DomainError("replication index exceeds 32 bits");
  }
  return Stream(master_seed, static_cast<std::uint32_t>(index), tag);
}

}  // namespace regen
