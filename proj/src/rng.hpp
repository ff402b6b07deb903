#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace synthctl {

// Sub-stream seeding: every randomized task derives its own seed from
// (base seed, stream id, task index) through SplitMix64, so results do not
// depend on execution order or thread count.
namespace seed_stream {
constexpr std::uint64_t kVSearch = 1;
constexpr std::uint64_t kDgpParams = 2;
constexpr std::uint64_t kDgpNoise = 3;
constexpr std::uint64_t kBenfordReference = 4;
}  // namespace seed_stream

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(base ^ (stream * 0xd6e8feb86659fd93ULL)) + index);
}

// mt19937_64 with hand-rolled distributions; the standard library's
// distribution objects are implementation-defined, these are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // uniform on [0, 1)
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer on [lo, hi] by rejection
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t draw;
    do {
      draw = gen_();
    } while (draw >= limit);
    return lo + static_cast<std::int64_t>(draw % span);
  }

  // Box-Muller, no caching
  double normal() {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Student t with integer df >= 3, unit variance scaling left to callers
  double student_t(int df) {
    double z = normal();
    double chi2 = 0.0;
    for (int i = 0; i < df; ++i) {
      double n = normal();
      chi2 += n * n;
    }
    return z / std::sqrt(chi2 / df);
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace synthctl
