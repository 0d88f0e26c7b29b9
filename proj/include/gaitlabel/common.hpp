#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace gaitlabel {

// Base class for every recoverable pipeline failure. Each condition callers
// are expected to branch on gets its own type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AnchorDegenerate : Error { using Error::Error; };
struct SequenceUnusable : Error { using Error::Error; };
struct NoFaceFound : Error { using Error::Error; };
struct AnalyzerUnavailable : Error { using Error::Error; };
struct FixtureMissing : Error { using Error::Error; };
struct InsufficientData : Error { using Error::Error; };
struct PhaseViolation : Error { using Error::Error; };
struct EmbedderUnavailable : Error { using Error::Error; };
struct TooFewSamples : Error { using Error::Error; };
struct NoLabeledSamples : Error { using Error::Error; };
struct SingularSystem : Error { using Error::Error; };
struct SingleClassDataset : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };
struct TooFewSubjects : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct WrongKeypointCount : Error { using Error::Error; };

using Rng = std::mt19937_64;

// Canonical uniform in [0,1) built directly from engine output, so draws do
// not depend on the standard library's distribution implementations.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). n must be positive.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

// splitmix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return mix_seed(seed ^ (value + 0x9e3779b97f4a7c15ULL));
}

// Box-Muller gaussian on top of uniform01; keeps draws independent of the
// standard library's distribution implementations.
inline double gaussian(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);  // in (0,1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(6.283185307179586476925286766559 * u2);
}

// FNV-1a, for deriving per-sample seeds from string ids.
inline std::uint64_t hash_str(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace gaitlabel
