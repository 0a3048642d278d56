#pragma once

#include <cstdint>

namespace jmdiag {

// Role of a random stream within a simulation. Each (master seed, subject,
// replicate, purpose) tuple names one independent stream, so results do not
// depend on scheduling or thread count.
enum class StreamPurpose : std::uint64_t {
  kParameters = 1,
  kEventTime = 2,
  kResidualError = 3,
  kImputation = 4,
  kStudy = 5,
  kStudyData = 6,
  kStudyReplicates = 7,
  kStudyImputation = 8,
};

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t split_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t absorb(std::uint64_t h, std::uint64_t v) {
  return split_mix((h + kGolden) ^ (v * 0xff51afd7ed558ccdULL + 0x2545f4914f6cdd1dULL));
}

}  // namespace detail

double norm_quantile(double p);  // defined in math.cpp

// Counter-derived pseudo-random stream (splitmix64 core). Streams with
// distinct coordinates are statistically independent; a stream's output is a
// pure function of its coordinates.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t subject, std::uint64_t replicate,
            StreamPurpose purpose)
      : state_(detail::absorb(
            detail::absorb(detail::absorb(detail::split_mix(master_seed + detail::kGolden), subject),
                           replicate),
            static_cast<std::uint64_t>(purpose))) {}

  std::uint64_t next_u64() {
    state_ += detail::kGolden;
    return detail::split_mix(state_);
  }

  // Uniform on the open interval (0,1): safe for log() and normal quantiles.
  double uniform01() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() { return norm_quantile(uniform01()); }

 private:
  std::uint64_t state_;
};

// Deterministic sub-seed derivation, used to give each study of a scenario
// its own master seed.
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index,
                                 StreamPurpose purpose) {
  return detail::absorb(detail::absorb(detail::split_mix(master_seed + detail::kGolden), index),
                        static_cast<std::uint64_t>(purpose));
}

}  // namespace jmdiag
