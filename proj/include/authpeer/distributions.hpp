#pragma once

#include <cstdint>

namespace authpeer::dist {

// log P(Y = y) for Y ~ Poisson(rate). Uses lgamma, finite for y up to ~1e6.
double poisson_logpmf(int64_t y, double rate);

// P(Y <= y). Exact summation in probability space; y < 0 gives 0.
double poisson_cdf(int64_t y, double rate);

double normal_logpdf(double x, double mean, double sd);
double normal_cdf(double x);  // standard normal

// Standard normal quantile, Wichura's AS 241 (absolute error < 1e-15).
double normal_quantile(double p);

// Upper-tail probability of a chi-square with df degrees of freedom.
double chi2_sf(double x, double df);

// Regularized incomplete gamma functions P(a,x) and Q(a,x) = 1 - P(a,x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

}  // namespace authpeer::dist
