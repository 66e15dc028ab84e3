#include "authpeer/rng.hpp"

#include <cmath>

#include "authpeer/distributions.hpp"
#include "authpeer/errors.hpp"

namespace authpeer {

namespace {

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

uint64_t stable_hash64(const std::string& text) {
  uint64_t h = 14695981039346656037ULL;  // FNV-1a
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t state = seed ^ (salt * 0x9e3779b97f4a7c15ULL);
  return splitmix64(state);
}

RngStream::RngStream(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {
  uint64_t state = seed ^ (stream * 0xda942042e4dd58b5ULL);
  uint64_t a = splitmix64(state);
  uint64_t b = splitmix64(state);
  gen_.seed(a ^ (b << 1));
  gen_.discard(4);
}

uint64_t RngStream::next_u64() { return gen_(); }

double RngStream::uniform() {
  // 53-bit mantissa shifted into the open interval.
  return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() { return dist::normal_quantile(uniform()); }

uint64_t RngStream::uniform_index(uint64_t n) {
  if (n == 0) throw ComputeError("uniform_index: n must be > 0");
  uint64_t bound = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = gen_();
  } while (x >= bound);
  return x % n;
}

// Inversion below rate 10, Hormann's PTRS transformed rejection above.
int64_t RngStream::poisson(double rate) {
  if (rate < 0.0 || !std::isfinite(rate)) throw ComputeError("poisson: bad rate");
  if (rate == 0.0) return 0;
  if (rate < 10.0) {
    double p = std::exp(-rate);
    double s = p;
    double u = uniform();
    int64_t k = 0;
    while (u > s && k < 400) {
      ++k;
      p *= rate / static_cast<double>(k);
      s += p;
    }
    return k;
  }
  const double b = 0.931 + 2.53 * std::sqrt(rate);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  const double log_rate = std::log(rate);
  for (;;) {
    double u = uniform() - 0.5;
    double v = uniform();
    double us = 0.5 - std::fabs(u);
    int64_t k = static_cast<int64_t>(std::floor((2.0 * a / us + b) * u + rate + 0.43));
    if (us >= 0.07 && v <= v_r) return k;
    if (k < 0 || (us < 0.013 && v > us)) continue;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
        static_cast<double>(k) * log_rate - rate - std::lgamma(static_cast<double>(k) + 1.0))
      return k;
  }
}

}  // namespace authpeer
