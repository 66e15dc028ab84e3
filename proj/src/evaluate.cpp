#include "authpeer/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "authpeer/distributions.hpp"
#include "authpeer/errors.hpp"
#include "authpeer/rng.hpp"

namespace authpeer::evaluate {

namespace {

double log_mean_exp(const std::vector<double>& v) {
  double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc / static_cast<double>(v.size()));
}

double sample_variance(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / (static_cast<double>(v.size()) - 1.0);
}

}  // namespace

WaicResult waic(const inference::PosteriorSamples& samples, const models::ParamIndex& pidx,
                const std::vector<models::Observation>& observations) {
  const long s = samples.draws.rows();
  if (s < 2) throw InputError("waic: need at least 2 posterior draws");
  WaicResult result;
  result.lppd_i.resize(observations.size());
  result.p_i.resize(observations.size());

  // Observations sharing (lambda_idx, psi_idx, y) have identical likelihood
  // vectors across draws, so evaluate each distinct triple once.
  std::map<std::tuple<int, int, int>, std::vector<size_t>> cells;
  for (size_t i = 0; i < observations.size(); ++i) {
    const auto& obs = observations[i];
    int li = pidx.lambda_index(obs);
    int pi = pidx.has_psi() ? pidx.psi_index(obs.m, obs.g) : -1;
    cells[{li, pi, obs.y}].push_back(i);
  }
  std::vector<double> eta(s), loglik(s);
  int last_li = -1, last_pi = -2;
  for (const auto& [key, members] : cells) {
    auto [li, pi, y] = key;
    if (li != last_li || pi != last_pi) {
      for (long j = 0; j < s; ++j) {
        double e = samples.draws(j, li);
        if (pi >= 0) e += samples.draws(j, pi);
        eta[j] = e;
      }
      last_li = li;
      last_pi = pi;
    }
    double lgam = std::lgamma(static_cast<double>(y) + 1.0);
    for (long j = 0; j < s; ++j) loglik[j] = y * eta[j] - std::exp(eta[j]) - lgam;
    double lppd = log_mean_exp(loglik);
    double p = sample_variance(loglik);
    for (size_t idx : members) {
      result.lppd_i[idx] = lppd;
      result.p_i[idx] = p;
    }
  }
  for (size_t i = 0; i < observations.size(); ++i) {
    result.lppd += result.lppd_i[i];
    result.p_waic += result.p_i[i];
  }
  result.elpd_waic = result.lppd - result.p_waic;
  return result;
}

double quantile_residual_at(int y, double rate, double u01) {
  double lo = y > 0 ? dist::poisson_cdf(y - 1, rate) : 0.0;
  double hi = dist::poisson_cdf(y, rate);
  double u = lo + u01 * (hi - lo);
  u = std::min(std::max(u, 1e-300), 1.0 - 1e-16);
  return dist::normal_quantile(u);
}

std::vector<double> quantile_residuals(const std::vector<int>& counts,
                                       const std::vector<double>& rates, uint64_t seed) {
  if (counts.size() != rates.size()) throw InputError("quantile_residuals: size mismatch");
  RngStream rng(seed, 0xd5);
  std::vector<double> residuals(counts.size());
  for (size_t i = 0; i < counts.size(); ++i) {
    if (!(rates[i] > 0.0)) throw InputError("quantile_residuals: rate must be > 0");
    residuals[i] = quantile_residual_at(counts[i], rates[i], rng.uniform());
  }
  return residuals;
}

TestResult jarque_bera(const std::vector<double>& series) {
  const double n = static_cast<double>(series.size());
  if (series.size() < 8) throw InputError("jarque_bera: need at least 8 values");
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : series) {
    double c = x - mean;
    m2 += c * c;
    m3 += c * c * c;
    m4 += c * c * c * c;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 < 1e-14) return {0.0, 1.0};
  double skew = m3 / std::pow(m2, 1.5);
  double kurt = m4 / (m2 * m2);
  double jb = n / 6.0 * (skew * skew + (kurt - 3.0) * (kurt - 3.0) / 4.0);
  return {jb, dist::chi2_sf(jb, 2.0)};
}

TestResult ljung_box(const std::vector<double>& series, int lags) {
  const int n = static_cast<int>(series.size());
  if (lags < 1) throw InputError("ljung_box: need at least one lag");
  if (lags >= n) throw InputError("ljung_box: lags must be < series length");
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= n;
  double denom = 0.0;
  for (double x : series) denom += (x - mean) * (x - mean);
  if (denom < 1e-14) return {0.0, 1.0};
  double q = 0.0;
  for (int k = 1; k <= lags; ++k) {
    double num = 0.0;
    for (int t = k; t < n; ++t) num += (series[t] - mean) * (series[t - k] - mean);
    double rho = num / denom;
    q += rho * rho / static_cast<double>(n - k);
  }
  q *= static_cast<double>(n) * (n + 2.0);
  return {q, dist::chi2_sf(q, static_cast<double>(lags))};
}

LabeledMetrics labeled_metrics(const detect::AnomalyReport& report,
                               const std::set<AttackKey>& truth) {
  LabeledMetrics metrics;
  metrics.truth_size = truth.size();
  for (const auto& row : report.rows) {
    if (!row.flagged) continue;
    ++metrics.total_flags;
    AttackKey key{row.user, row.bucket, row.method == ingest::Method::kKerberos ? 1 : 2};
    if (truth.count(key) > 0) ++metrics.true_flags;
  }
  if (metrics.total_flags > 0)
    metrics.precision =
        static_cast<double>(metrics.true_flags) / static_cast<double>(metrics.total_flags);
  if (!truth.empty())
    metrics.recall =
        static_cast<double>(metrics.true_flags) / static_cast<double>(metrics.truth_size);
  return metrics;
}

ResidualDiagnostics residual_diagnostics(const std::vector<ingest::HourlyCount>& train_rows,
                                         const clustering::GroupAssignment& groups,
                                         const models::ParamIndex& pidx,
                                         const inference::PosteriorSamples& samples, int lags,
                                         double level, uint64_t seed) {
  const long s = samples.draws.rows();
  // Posterior-mean rate per cell, computed lazily.
  std::map<std::pair<int, int>, double> mean_rate;
  auto cell_rate = [&](int li, int pi) {
    auto it = mean_rate.find({li, pi});
    if (it != mean_rate.end()) return it->second;
    double acc = 0.0;
    for (long j = 0; j < s; ++j) {
      double eta = samples.draws(j, li);
      if (pi >= 0) eta += samples.draws(j, pi);
      acc += std::exp(eta);
    }
    double rate = acc / static_cast<double>(s);
    mean_rate[{li, pi}] = rate;
    return rate;
  };

  std::map<std::string, std::vector<const ingest::HourlyCount*>> by_user;
  for (const auto& row : train_rows) by_user[row.user].push_back(&row);

  ResidualDiagnostics diag;
  size_t jb_rejections = 0, lb_rejections = 0;
  uint64_t user_idx = 0;
  for (auto& [user, rows] : by_user) {
    std::sort(rows.begin(), rows.end(),
              [](const ingest::HourlyCount* a, const ingest::HourlyCount* b) {
                return std::tie(a->bucket, a->method) < std::tie(b->bucket, b->method);
              });
    auto git = groups.mapping.find(user);
    if (git == groups.mapping.end())
      throw InputError("residual_diagnostics: user without group: " + user);
    std::vector<int> counts;
    std::vector<double> rates;
    counts.reserve(rows.size());
    for (const auto* row : rows) {
      models::Observation obs;
      obs.y = row->count;
      obs.h = row->hour;
      obs.d = row->dow;
      obs.g = git->second;
      obs.m = row->method == ingest::Method::kKerberos ? 1 : 2;
      int li = pidx.lambda_index(obs);
      int pi = pidx.has_psi() ? pidx.psi_index(obs.m, obs.g) : -1;
      counts.push_back(obs.y);
      rates.push_back(cell_rate(li, pi));
    }
    std::vector<double> residuals = quantile_residuals(counts, rates, mix_seed(seed, user_idx++));
    if (residuals.size() >= 8) {
      ++diag.users_tested_jb;
      if (jarque_bera(residuals).p_value < level) ++jb_rejections;
    }
    if (static_cast<int>(residuals.size()) > lags + 1) {
      ++diag.users_tested_lb;
      if (ljung_box(residuals, lags).p_value < level) ++lb_rejections;
    }
  }
  if (diag.users_tested_jb > 0)
    diag.jb_rejection_rate = static_cast<double>(jb_rejections) / diag.users_tested_jb;
  if (diag.users_tested_lb > 0)
    diag.lb_rejection_rate = static_cast<double>(lb_rejections) / diag.users_tested_lb;
  return diag;
}

}  // namespace authpeer::evaluate
