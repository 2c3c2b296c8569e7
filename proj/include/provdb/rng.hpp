#pragma once

#include <cstdint>
#include <random>

namespace provdb {

// Portable seeded randomness. The engine is std::mt19937_64, whose output
// sequence is fixed by the C++ standard; the bounded draws below avoid the
// std distributions, whose algorithms vary between standard libraries.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  // Uniform in [lo, hi].
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi) {
    return hi - lo == UINT64_MAX ? engine_() : lo + below(hi - lo + 1);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace provdb
