#ifndef CALM_RNG_HPP_
#define CALM_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace calm {

// SplitMix64 finaliser. Used to derive independent stream seeds from a root
// seed plus a path of stream identifiers (phase, iteration, epoch, rollout).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(root);
  for (std::uint64_t id : path) h = splitmix64(h ^ splitmix64(id + 1));
  return h;
}

// Stream identifiers for derive_seed.
enum class Stream : std::uint64_t {
  kInit = 1,
  kPpoRollout = 2,
  kEstimatorRollout = 3,
  kEvaluation = 4,
  kLinearBaseline = 5,
};

// Each rollout / worker owns one of these; never shared across threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return unit_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }
  double normal() { return normal_(engine_); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace calm

#endif  // CALM_RNG_HPP_
