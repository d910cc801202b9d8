#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace msba {

uint64_t splitmix64(uint64_t& state);

// Combine a seed with a stream tag into a new seed (for per-sample rng splits).
uint64_t hash_combine(uint64_t a, uint64_t b);

// xoshiro256++ with hand-rolled distributions so sequences do not depend on
// the standard library implementation.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  double uniform01();                       // [0,1), 53-bit resolution
  double uniform(double lo, double hi);
  int uniform_int(int lo, int hi);          // inclusive bounds
  double normal();                          // standard normal, Box-Muller
  double gamma(double shape);               // Gamma(shape, 1), shape > 0
  std::vector<int> permutation(int n);

  // Independent substream derived from this generator's seed and a tag.
  Rng split(uint64_t tag) const;

 private:
  std::array<uint64_t, 4> s_{};
  uint64_t seed_ = 0;
};

}  // namespace msba
