#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace upstream {

// Seeded random stream with deterministic sub-stream derivation.
//
// Every stochastic component of a run owns its own RngStream derived from the
// master seed and a stream tag, so concurrent workers never contend on shared
// state and replaying a seed reproduces every draw bit-exactly. Gaussian
// draws use Box-Muller with no cached spare: one call consumes exactly two
// engine outputs, which keeps the draw count per event fixed and auditable.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  // splitmix64 finalizer; used to whiten tag combinations into engine seeds.
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // Whitened seed for the (master, tag, a, b) sub-stream. Identical inputs
  // give identical seeds; distinct tags give statistically unrelated ones.
  static std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag,
                                   std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t s = mix(master);
    s = mix(s ^ mix(tag));
    s = mix(s ^ mix(a));
    s = mix(s ^ mix(b));
    return s;
  }

  static RngStream derive(std::uint64_t master, std::uint64_t tag,
                          std::uint64_t a = 0, std::uint64_t b = 0) {
    return RngStream(derive_seed(master, tag, a, b));
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  // Unbiased integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller (two uniforms per call, no cache).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]: keeps log() finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// Stream tags for the run-level derivation tree. Keeping them in one table
// makes collisions impossible by inspection.
namespace stream_tag {
inline constexpr std::uint64_t kEnv = 1;
inline constexpr std::uint64_t kPolicy = 2;
inline constexpr std::uint64_t kNetInit = 3;
inline constexpr std::uint64_t kTrainer = 4;
inline constexpr std::uint64_t kCatalog = 5;
inline constexpr std::uint64_t kAgentInit = 6;
inline constexpr std::uint64_t kBootstrap = 7;
inline constexpr std::uint64_t kScenario = 8;
inline constexpr std::uint64_t kEval = 9;
}  // namespace stream_tag

}  // namespace upstream
