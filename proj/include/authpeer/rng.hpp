#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace authpeer {

// Deterministic seeded stream: the (seed, stream) pair fully determines the
// draw sequence, so independent tasks can own disjoint streams and merge
// results in any order.
class RngStream {
 public:
  explicit RngStream(uint64_t seed, uint64_t stream = 0);

  uint64_t next_u64();
  double uniform();         // open interval (0,1)
  double normal();          // standard normal by inverse CDF
  double normal(double mean, double sd) { return mean + sd * normal(); }
  int64_t poisson(double rate);  // rate >= 0; rate 0 always yields 0
  // Uniform integer in [0, n).
  uint64_t uniform_index(uint64_t n);

  uint64_t seed() const { return seed_; }
  uint64_t stream() const { return stream_; }

 private:
  std::mt19937_64 gen_;
  uint64_t seed_;
  uint64_t stream_;
};

// Stable 64-bit mix for deriving per-task stream ids from strings.
uint64_t stable_hash64(const std::string& text);
uint64_t mix_seed(uint64_t seed, uint64_t salt);

}  // namespace authpeer
