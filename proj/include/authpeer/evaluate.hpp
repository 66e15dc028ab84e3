#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "authpeer/detect.hpp"
#include "authpeer/inference.hpp"
#include "authpeer/models.hpp"

namespace authpeer::evaluate {

struct WaicResult {
  double elpd_waic = 0.0;  // lppd - p_waic, log scale, higher is better
  double lppd = 0.0;
  double p_waic = 0.0;
  std::vector<double> lppd_i;
  std::vector<double> p_i;
};

WaicResult waic(const inference::PosteriorSamples& samples, const models::ParamIndex& pidx,
                const std::vector<models::Observation>& observations);

// Randomized (Dunn-Smyth) quantile residuals at the given per-observation
// rates: u drawn uniformly on (cdf(y-1), cdf(y)], then normal_quantile(u).
std::vector<double> quantile_residuals(const std::vector<int>& counts,
                                       const std::vector<double>& rates, uint64_t seed);

// Residual at a fixed position u01 within the (cdf(y-1), cdf(y)] interval;
// u01 = 0.5 is the interval midpoint.
double quantile_residual_at(int y, double rate, double u01);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// JB = n/6 (S^2 + (K-3)^2/4) with moment-based skewness and kurtosis;
// chi-square with 2 df. Zero variance maps to (0, 1).
TestResult jarque_bera(const std::vector<double>& series);

// Q = n(n+2) sum_k rho_k^2/(n-k); chi-square with `lags` df.
TestResult ljung_box(const std::vector<double>& series, int lags);

struct LabeledMetrics {
  std::optional<double> precision;  // null when nothing was flagged
  std::optional<double> recall;     // null when the truth set is empty
  size_t true_flags = 0;
  size_t total_flags = 0;
  size_t truth_size = 0;
};

using AttackKey = std::tuple<std::string, int64_t, int>;  // user, bucket, method(1|2)

LabeledMetrics labeled_metrics(const detect::AnomalyReport& report,
                               const std::set<AttackKey>& truth);

// Per-user residual diagnostics over train rows in time order, at the fitted
// model's posterior-mean cell rates.
struct ResidualDiagnostics {
  double jb_rejection_rate = 0.0;
  double lb_rejection_rate = 0.0;
  size_t users_tested_jb = 0;
  size_t users_tested_lb = 0;
};

ResidualDiagnostics residual_diagnostics(const std::vector<ingest::HourlyCount>& train_rows,
                                         const clustering::GroupAssignment& groups,
                                         const models::ParamIndex& pidx,
                                         const inference::PosteriorSamples& samples, int lags,
                                         double level, uint64_t seed);

}  // namespace authpeer::evaluate
