#include <doctest.h>

#include <cmath>
#include <vector>

#include "authpeer/distributions.hpp"
#include "authpeer/errors.hpp"
#include "authpeer/rng.hpp"

using namespace authpeer;

namespace {

// Independent CDF oracle for the quantile: bisection on the erfc-based CDF.
double quantile_by_bisection(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (dist::normal_cdf(mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("poisson_logpmf fixtures") {
  CHECK(dist::poisson_logpmf(1, 1.0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(dist::poisson_logpmf(0, 2.0) == doctest::Approx(-2.0).epsilon(1e-12));
  // -3 + 2 log 3 - log 2
  CHECK(dist::poisson_logpmf(2, 3.0) ==
        doctest::Approx(-3.0 + 2.0 * std::log(3.0) - std::log(2.0)).epsilon(1e-12));
  CHECK(dist::poisson_logpmf(2, 3.0) == doctest::Approx(-1.49592).epsilon(1e-5));
  CHECK(std::isfinite(dist::poisson_logpmf(1000000, 5.0)));
  CHECK_THROWS_AS(dist::poisson_logpmf(1, 0.0), ComputeError);
  CHECK_THROWS_AS(dist::poisson_logpmf(1, -2.0), ComputeError);
}

TEST_CASE("poisson pmf sums to one") {
  for (double rate : {0.5, 1.0, 4.0, 20.0}) {
    double total = 0.0;
    for (int y = 0; y <= 200; ++y) total += std::exp(dist::poisson_logpmf(y, rate));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("poisson_cdf fixtures and identities") {
  CHECK(dist::poisson_cdf(0, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(dist::poisson_cdf(500, 3.0) == doctest::Approx(1.0).epsilon(1e-12));
  double diff = dist::poisson_cdf(5, 3.0) - dist::poisson_cdf(4, 3.0);
  CHECK(diff == doctest::Approx(std::exp(dist::poisson_logpmf(5, 3.0))).epsilon(1e-12));
  // monotone in y
  double prev = 0.0;
  for (int y = 0; y < 30; ++y) {
    double cur = dist::poisson_cdf(y, 7.5);
    CHECK(cur >= prev);
    prev = cur;
  }
  CHECK_THROWS_AS(dist::poisson_cdf(3, 0.0), ComputeError);
}

TEST_CASE("normal_logpdf fixture") {
  CHECK(dist::normal_logpdf(0.0, 0.0, 5.0) ==
        doctest::Approx(-std::log(5.0 * std::sqrt(2.0 * M_PI))).epsilon(1e-12));
  CHECK(dist::normal_logpdf(0.0, 0.0, 5.0) == doctest::Approx(-2.52838).epsilon(1e-5));
  CHECK_THROWS_AS(dist::normal_logpdf(0.0, 0.0, 0.0), ComputeError);
}

TEST_CASE("normal_quantile against the bisection oracle") {
  CHECK(dist::normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(dist::normal_quantile(0.975) == doctest::Approx(1.95996).epsilon(1e-5));
  for (double p : {1e-6, 0.001, 0.025, 0.18394, 0.5, 0.6, 0.975, 0.999, 1.0 - 1e-6}) {
    CHECK(dist::normal_quantile(p) == doctest::Approx(quantile_by_bisection(p)).epsilon(1e-8));
  }
  CHECK_THROWS_AS(dist::normal_quantile(0.0), ComputeError);
  CHECK_THROWS_AS(dist::normal_quantile(1.0), ComputeError);
}

TEST_CASE("quantile and cdf are inverses") {
  for (double x = -6.0; x <= 6.0; x += 0.25) {
    CHECK(dist::normal_quantile(dist::normal_cdf(x)) == doctest::Approx(x).epsilon(1e-6));
  }
}

TEST_CASE("chi-square survival function") {
  // df = 2 reduces to exp(-x/2)
  for (double x : {0.5, 1.0, 4.0, 10.0})
    CHECK(dist::chi2_sf(x, 2.0) == doctest::Approx(std::exp(-x / 2.0)).epsilon(1e-10));
  CHECK(dist::chi2_sf(0.0, 5.0) == doctest::Approx(1.0));
  for (double a : {0.5, 1.0, 5.0, 10.0})
    for (double x : {0.1, 1.0, 5.0, 30.0})
      CHECK(dist::gamma_p(a, x) + dist::gamma_q(a, x) == doctest::Approx(1.0).epsilon(1e-12));
  // chi2_sf(x, 10) at the 0.05 critical value 18.307
  CHECK(dist::chi2_sf(18.307, 10.0) == doctest::Approx(0.05).epsilon(1e-3));
}

TEST_CASE("rng streams are deterministic and disjoint") {
  RngStream a(42, 1), b(42, 1), c(42, 2);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    double ua = a.uniform(), ub = b.uniform(), uc = c.uniform();
    all_equal = all_equal && ua == ub;
    any_diff = any_diff || ua != uc;
    CHECK(ua > 0.0);
    CHECK(ua < 1.0);
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("seeded poisson draws match moments") {
  RngStream rng(123, 0);
  const int n = 100000;
  const double rate = 4.0;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double draw = static_cast<double>(rng.poisson(rate));
    sum += draw;
    sum_sq += draw * draw;
  }
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  // 3 standard errors: mean se = sqrt(rate/n), var se = sqrt((mu4 - var^2)/n)
  double se_mean = std::sqrt(rate / n);
  double mu4 = rate * (1.0 + 3.0 * rate);
  double se_var = std::sqrt((mu4 - rate * rate) / n);
  CHECK(std::fabs(mean - rate) < 3.0 * se_mean);
  CHECK(std::fabs(var - rate) < 3.0 * se_var);
}

TEST_CASE("poisson sampler covers both regimes") {
  RngStream rng(9, 0);
  // high-rate PTRS path
  const int n = 50000;
  const double rate = 45.0;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += static_cast<double>(rng.poisson(rate));
  CHECK(sum / n == doctest::Approx(rate).epsilon(0.01));
  CHECK(rng.poisson(0.0) == 0);
}

TEST_CASE("normal draws match moments") {
  RngStream rng(7, 3);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double z = rng.normal();
    sum += z;
    sum_sq += z * z;
  }
  CHECK(std::fabs(sum / n) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(sum_sq / n == doctest::Approx(1.0).epsilon(0.02));
}
