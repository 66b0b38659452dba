#pragma once

#include <cstdint>
#include <string_view>

namespace cail {

// Deterministic pseudo-random stream (xoshiro256++), decoupled from the
// standard library's unspecified distribution algorithms so that a given
// (seed, stream) pair produces the same draw sequence on every build.
//
// Every stochastic consumer in the artifact owns a named stream derived
// from the master seed; streams never share state, so adding draws to one
// subsystem cannot shift another subsystem's sequence.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  static std::uint64_t hash_name(std::string_view name);

  // Derive a child stream; used for per-instance sub-streams.
  RngStream derive(std::uint64_t salt) const;

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);
  // Unbiased integer on [0, n), n >= 1.
  std::uint64_t uniform_index(std::uint64_t n);
  // Standard normal via the polar method (deterministic rejection loop).
  double gauss();
  double gauss(double mean, double stddev);

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream identifiers used across the trainer. Fixed numbering is part of
// the determinism contract: a run is reproducible from (seed, config).
enum class Stream : std::uint64_t {
  kEnvInit = 1,
  kNetInit = 2,
  kReplaySample = 3,
  kExpertSample = 4,
  kAugment = 5,
  kActionNoise = 6,
  kTargetNoise = 7,
  kActorNoise = 8,
  kEval = 9,
  kBcShuffle = 10,
};

inline RngStream make_stream(std::uint64_t master_seed, Stream s) {
  return RngStream(master_seed, static_cast<std::uint64_t>(s));
}

}  // namespace cail
