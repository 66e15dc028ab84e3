#include "authpeer/detect.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <tuple>

#include "authpeer/errors.hpp"
#include "authpeer/rng.hpp"
#include "authpeer/timeutil.hpp"

namespace authpeer::detect {

HpdiInterval hpdi(std::vector<double> draws, double alpha) {
  if (draws.empty()) throw InputError("hpdi: empty draws");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("hpdi: alpha must be in (0,1)");
  std::sort(draws.begin(), draws.end());
  const size_t n = draws.size();
  const size_t window = static_cast<size_t>(std::ceil((1.0 - alpha) * static_cast<double>(n)));
  const size_t m = std::max<size_t>(window, 1);
  size_t best = 0;
  double best_width = draws[m - 1] - draws[0];
  for (size_t i = 1; i + m <= n; ++i) {
    double width = draws[i + m - 1] - draws[i];
    if (width < best_width) {
      best_width = width;
      best = i;
    }
  }
  HpdiInterval interval;
  interval.lower = draws[best];
  interval.upper = draws[best + m - 1];
  interval.alpha = alpha;
  size_t inside = 0;
  for (double v : draws)
    if (v >= interval.lower && v <= interval.upper) ++inside;
  interval.mass = static_cast<double>(inside) / static_cast<double>(n);
  return interval;
}

HpdiInterval hpdi_counts(const std::vector<int>& draws, double alpha) {
  std::vector<double> as_double(draws.begin(), draws.end());
  return hpdi(std::move(as_double), alpha);
}

std::vector<int> posterior_predictive(const inference::PosteriorSamples& samples,
                                      const models::ParamIndex& pidx,
                                      const models::Observation& cell, int n_draws,
                                      uint64_t seed) {
  if (n_draws < 1) throw InputError("posterior_predictive: need at least one draw");
  const long s_total = samples.draws.rows();
  if (s_total < 1) throw InputError("posterior_predictive: no posterior draws");
  // Validates the cell against the model's index ranges.
  const int lambda_idx = pidx.lambda_index(cell);
  const int psi_idx = pidx.has_psi() ? pidx.psi_index(cell.m, cell.g) : -1;
  RngStream rng(seed, stable_hash64("predictive") ^ static_cast<uint64_t>(lambda_idx * 2 + 1) ^
                          (static_cast<uint64_t>(psi_idx + 1) << 32));
  std::vector<int> counts(n_draws);
  for (int i = 0; i < n_draws; ++i) {
    long s = i % s_total;
    double eta = samples.draws(s, lambda_idx);
    if (psi_idx >= 0) eta += samples.draws(s, psi_idx);
    counts[i] = static_cast<int>(rng.poisson(std::exp(std::min(eta, 30.0))));
  }
  return counts;
}

int64_t cell_key(const models::ModelSpec& spec, const models::Observation& obs) {
  int h = spec.uses_seasonality ? obs.h : 0;
  int d = spec.uses_seasonality ? obs.d : 1;
  int g = spec.uses_groups ? obs.g : 0;
  int m = spec.uses_method ? obs.m : 1;
  return ((static_cast<int64_t>(g) * 8 + d) * 32 + h) * 4 + m;
}

AnomalyReport flag_anomalies(const std::vector<ingest::HourlyCount>& test_rows,
                             const clustering::GroupAssignment& groups,
                             const std::map<int64_t, HpdiInterval>& thresholds,
                             models::ModelId model, clustering::GroupingMethod grouping) {
  const models::ModelSpec spec = models::ModelSpec::make(model, groups.k);
  AnomalyReport report;
  report.rows.reserve(test_rows.size());
  for (const auto& row : test_rows) {
    auto git = groups.mapping.find(row.user);
    if (git == groups.mapping.end())
      throw InputError("flag_anomalies: user without group: " + row.user);
    models::Observation obs;
    obs.y = row.count;
    obs.h = row.hour;
    obs.d = row.dow;
    obs.g = git->second;
    obs.m = row.method == ingest::Method::kKerberos ? 1 : 2;
    auto tit = thresholds.find(cell_key(spec, obs));
    if (tit == thresholds.end())
      throw InputError("flag_anomalies: missing threshold for cell (h=" + std::to_string(obs.h) +
                       ",d=" + std::to_string(obs.d) + ",g=" + std::to_string(obs.g) +
                       ",m=" + std::to_string(obs.m) + ")");
    AnomalyRow out;
    out.user = row.user;
    out.bucket = row.bucket;
    out.method = row.method;
    out.group = obs.g;
    out.observed = row.count;
    out.hpdi_upper = tit->second.upper;
    out.flagged = static_cast<double>(row.count) > tit->second.upper;
    out.model = model;
    out.grouping = grouping;
    report.rows.push_back(std::move(out));
  }
  std::sort(report.rows.begin(), report.rows.end(), [](const AnomalyRow& a, const AnomalyRow& b) {
    return std::tie(a.user, a.bucket, a.method) < std::tie(b.user, b.bucket, b.method);
  });
  return report;
}

double alert_rate(const AnomalyReport& report) {
  if (report.rows.empty()) throw InputError("alert_rate: empty report");
  size_t flagged = 0;
  for (const auto& row : report.rows) flagged += row.flagged ? 1 : 0;
  return static_cast<double>(flagged) / static_cast<double>(report.rows.size());
}

namespace {

std::string format_upper(double upper) {
  if (upper == std::floor(upper) && std::fabs(upper) < 1e15)
    return std::to_string(static_cast<long long>(upper));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", upper);
  return buf;
}

}  // namespace

void write_alerts_csv(std::ostream& out, const AnomalyReport& report, bool header) {
  if (header) out << "user,bucket,method,group,observed,hpdi_upper,flagged,model,grouping\n";
  for (const auto& row : report.rows) {
    out << row.user << ',' << timeutil::format_iso8601_utc(row.bucket) << ','
        << ingest::method_name(row.method) << ',' << row.group << ',' << row.observed << ','
        << format_upper(row.hpdi_upper) << ',' << (row.flagged ? 1 : 0) << ','
        << models::model_name(row.model) << ',' << clustering::grouping_name(row.grouping) << '\n';
  }
}

}  // namespace authpeer::detect
