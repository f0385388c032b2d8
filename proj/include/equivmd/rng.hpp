#pragma once

#include <cmath>
#include <cstdint>

namespace equivmd {

// Reproducibility contract: every random stream in the library is derived
// from an RngSeed by hashing its label fields with the SplitMix64 finalizer.
// The constants below are load-bearing; changing any of them changes every
// stream, so they are fixed for the life of the file formats.
inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ull;

/// SplitMix64 finalizer (Steele, Lea & Flood's SplittableRandom mixer).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Counter-based 64-bit generator: output i is mix64(seed + i*gamma).
/// Satisfies UniformRandomBitGenerator; trivially copyable, jump-ahead by
/// construction, one private instance per stream.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  SplitMix64() = default;
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() { return mix64(state_ += kGoldenGamma); }

 private:
  std::uint64_t state_ = 0;
};

/// A master seed plus the stream labels that identify one logical stream of
/// the simulation study. Identical label tuples yield identical streams.
struct RngSeed {
  std::uint64_t master = 0;
  std::uint64_t scenario = 0;
  std::uint64_t sample_size = 0;
  std::uint64_t replication = 0;
  std::uint64_t group = 0;

  /// Chained hash of all fields; position-dependent offsets keep permuted
  /// label tuples from colliding.
  std::uint64_t state() const {
    std::uint64_t h = mix64(master + 1 * kGoldenGamma);
    h = mix64(h ^ (scenario + 2 * kGoldenGamma));
    h = mix64(h ^ (sample_size + 3 * kGoldenGamma));
    h = mix64(h ^ (replication + 4 * kGoldenGamma));
    h = mix64(h ^ (group + 5 * kGoldenGamma));
    return h;
  }

  friend bool operator==(const RngSeed&, const RngSeed&) = default;
};

inline SplitMix64 make_engine(const RngSeed& seed) { return SplitMix64(seed.state()); }

/// Engine for a substream below the label tuple (e.g. bootstrap replicate b).
inline SplitMix64 make_engine(const RngSeed& seed, std::uint64_t sub1, std::uint64_t sub2 = 0) {
  std::uint64_t h = mix64(seed.state() ^ (sub1 + 6 * kGoldenGamma));
  h = mix64(h ^ (sub2 + 7 * kGoldenGamma));
  return SplitMix64(h);
}

/// Uniform double in [0, 1), 53-bit resolution.
inline double uniform01(SplitMix64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Uniform double in (0, 1]; safe under log().
inline double uniform_open(SplitMix64& eng) {
  return static_cast<double>((eng() >> 11) + 1) * 0x1.0p-53;
}

/// Uniform index in [0, n) via the 128-bit multiply trick.
inline std::size_t uniform_index(SplitMix64& eng, std::size_t n) {
  using u128 = unsigned __int128;
  return static_cast<std::size_t>((u128(eng()) * u128(n)) >> 64);
}

/// Standard normal draws via Box-Muller over a private SplitMix64. The draw
/// sequence is a fixed function of the engine stream, independent of the
/// platform's library internals.
class GaussianStream {
 public:
  explicit GaussianStream(SplitMix64 eng) : eng_(eng) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open(eng_);
    const double u2 = uniform01(eng_);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  SplitMix64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace equivmd
