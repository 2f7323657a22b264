#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace dsrdiff {

// Seeded generator used for all stochastic choices (init, noise, shuffles).
// normal() is hand-rolled Box-Muller so that sequences depend only on the
// mt19937_64 stream, not on the standard library's distribution internals.
class RandomEngine {
 public:
  explicit RandomEngine(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal();

  std::vector<double> normal_vec(size_t n);

  // [0, n)
  int64_t randint(int64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<size_t>(randint(static_cast<int64_t>(i)))]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent stream for a named purpose ("init", "noise", ...),
// so consuming one stream never shifts another.
uint64_t sub_seed(uint64_t seed, const std::string& tag);

}  // namespace dsrdiff
