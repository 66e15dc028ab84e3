#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "authpeer/detect.hpp"
#include "authpeer/errors.hpp"
#include "authpeer/rng.hpp"

using namespace authpeer;
using detect::HpdiInterval;

namespace {

// exhaustive oracle: every contiguous window of at least ceil((1-alpha)n)
// sorted draws, minimal width, ties to the smallest lower endpoint
HpdiInterval hpdi_oracle(std::vector<double> draws, double alpha) {
  std::sort(draws.begin(), draws.end());
  const size_t n = draws.size();
  const size_t m = static_cast<size_t>(std::ceil((1.0 - alpha) * static_cast<double>(n)));
  HpdiInterval best;
  best.lower = draws.front();
  best.upper = draws.back();
  best.alpha = alpha;
  double best_width = best.upper - best.lower;
  bool found = false;
  for (size_t size = m; size <= n; ++size) {
    for (size_t i = 0; i + size <= n; ++i) {
      double width = draws[i + size - 1] - draws[i];
      if (!found || width < best_width ||
          (width == best_width && draws[i] < best.lower)) {
        best_width = width;
        best.lower = draws[i];
        best.upper = draws[i + size - 1];
        found = true;
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("hpdi point mass and spec fixture") {
  auto point = detect::hpdi(std::vector<double>(12, 7.0), 0.1);
  CHECK(point.lower == 7.0);
  CHECK(point.upper == 7.0);
  CHECK(point.mass == doctest::Approx(1.0));

  auto fixture = detect::hpdi_counts({0, 0, 1, 1, 1, 2, 2, 3, 4, 10}, 0.2);
  CHECK(fixture.lower == 0.0);
  CHECK(fixture.upper == 3.0);
  CHECK(fixture.mass >= 0.8);

  CHECK_THROWS_AS(detect::hpdi({}, 0.1), InputError);
  CHECK_THROWS_AS(detect::hpdi({1.0}, 0.0), InputError);
  CHECK_THROWS_AS(detect::hpdi({1.0}, 1.0), InputError);
}

TEST_CASE("hpdi equals the exhaustive window oracle") {
  RngStream rng(404, 0);
  for (int trial = 0; trial < 60; ++trial) {
    size_t n = 5 + rng.uniform_index(120);
    std::vector<double> draws(n);
    bool integer_draws = trial % 2 == 0;
    for (auto& v : draws)
      v = integer_draws ? static_cast<double>(rng.poisson(5.0)) : rng.normal();
    double alpha = 0.02 + 0.3 * rng.uniform();
    auto got = detect::hpdi(draws, alpha);
    auto want = hpdi_oracle(draws, alpha);
    CHECK(got.lower == want.lower);
    CHECK(got.upper == want.upper);
    CHECK(got.mass >= 1.0 - alpha);
  }
}

TEST_CASE("hpdi mass covers 99% of poisson draws") {
  RngStream rng(5, 5);
  std::vector<int> draws(10000);
  for (auto& v : draws) v = static_cast<int>(rng.poisson(5.0));
  auto interval = detect::hpdi_counts(draws, 0.01);
  CHECK(interval.mass >= 0.99);
  // fraction of fresh same-rate draws above the upper limit stays small
  int above = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i)
    if (static_cast<double>(rng.poisson(5.0)) > interval.upper) ++above;
  CHECK(static_cast<double>(above) / trials <= 0.02);
}

TEST_CASE("hpdi matches the central interval on symmetric draws") {
  // an exactly symmetric sample: the HPDI must sit at the central window
  RngStream rng(17, 1);
  std::vector<double> half(500);
  for (auto& v : half) v = std::fabs(rng.normal());
  std::vector<double> draws;
  for (double v : half) {
    draws.push_back(v);
    draws.push_back(-v);
  }
  std::sort(draws.begin(), draws.end());
  const double alpha = 0.1;
  auto interval = detect::hpdi(draws, alpha);
  const size_t n = draws.size();
  const size_t m = static_cast<size_t>(std::ceil((1.0 - alpha) * n));
  // symmetric window start
  const size_t central_start = (n - m) / 2;
  size_t got_start = std::lower_bound(draws.begin(), draws.end(), interval.lower) - draws.begin();
  CHECK(std::llabs(static_cast<long long>(got_start) -
                   static_cast<long long>(central_start)) <= 1);
}

TEST_CASE("posterior_predictive from a degenerate posterior") {
  inference::PosteriorSamples samples;
  samples.draws = Eigen::MatrixXd::Constant(100, 1, std::log(4.0));
  models::ParamIndex pidx(models::ModelSpec::make(models::ModelId::kM1, 1));
  models::Observation cell{1, 0, 1, 0, 1};
  auto draws = detect::posterior_predictive(samples, pidx, cell, 100000, 9);
  double mean = 0.0;
  for (int v : draws) mean += v;
  mean /= draws.size();
  double se = std::sqrt(4.0 / draws.size());
  CHECK(std::fabs(mean - 4.0) < 3.0 * se);

  auto again = detect::posterior_predictive(samples, pidx, cell, 1000, 9);
  auto differ = detect::posterior_predictive(samples, pidx, cell, 1000, 10);
  CHECK(std::equal(again.begin(), again.end(),
                   detect::posterior_predictive(samples, pidx, cell, 1000, 9).begin()));
  CHECK(again != differ);

  // rate near zero puts the predictive mode at 0
  samples.draws.setConstant(std::log(0.01));
  auto low = detect::posterior_predictive(samples, pidx, cell, 2000, 3);
  int zeros = static_cast<int>(std::count(low.begin(), low.end(), 0));
  CHECK(zeros > 1900);
}

TEST_CASE("flag_anomalies strict upper rule") {
  models::ModelSpec spec = models::ModelSpec::make(models::ModelId::kM1, 1);
  clustering::GroupAssignment groups;
  groups.mapping = {{"alice", 0}, {"bob", 0}, {"carol", 0}};
  groups.k = 1;
  auto make_row = [&](const std::string& user, int count) {
    ingest::HourlyCount row;
    row.user = user;
    row.bucket = 1704067200;
    row.hour = 0;
    row.dow = 2;
    row.method = ingest::Method::kKerberos;
    row.count = count;
    return row;
  };
  models::Observation cell{1, 0, 1, 0, 1};
  std::map<int64_t, detect::HpdiInterval> thresholds;
  thresholds[detect::cell_key(spec, cell)] = {5.0, 10.0, 0.01, 0.99};

  auto report = detect::flag_anomalies(
      {make_row("alice", 11), make_row("bob", 10), make_row("carol", 2)}, groups, thresholds,
      models::ModelId::kM1, clustering::GroupingMethod::kHr);
  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].flagged);        // 11 > 10
  CHECK_FALSE(report.rows[1].flagged);  // strict inequality
  CHECK_FALSE(report.rows[2].flagged);  // below the lower limit never flags
  CHECK(detect::alert_rate(report) == doctest::Approx(1.0 / 3.0));

  // monotone: raising an observation never unflags it
  for (int y = 11; y < 40; ++y) {
    auto higher = detect::flag_anomalies({make_row("alice", y)}, groups, thresholds,
                                         models::ModelId::kM1, clustering::GroupingMethod::kHr);
    CHECK(higher.rows[0].flagged);
  }

  // a missing cell names the offender
  std::map<int64_t, detect::HpdiInterval> empty;
  CHECK_THROWS_WITH_AS(
      detect::flag_anomalies({make_row("alice", 1)}, groups, empty, models::ModelId::kM1,
                             clustering::GroupingMethod::kHr),
      doctest::Contains("missing threshold"), InputError);
}

TEST_CASE("alert_rate fixtures") {
  detect::AnomalyReport report;
  for (int i = 0; i < 200; ++i) {
    detect::AnomalyRow row;
    row.user = "u" + std::to_string(i);
    row.flagged = i < 2;
    report.rows.push_back(row);
  }
  CHECK(detect::alert_rate(report) == doctest::Approx(0.01));
  for (auto& row : report.rows) row.flagged = false;
  CHECK(detect::alert_rate(report) == doctest::Approx(0.0));
  CHECK_THROWS_AS(detect::alert_rate(detect::AnomalyReport{}), InputError);
}

TEST_CASE("alerts csv format") {
  detect::AnomalyReport report;
  detect::AnomalyRow row;
  row.user = "alice";
  row.bucket = 1704067200;
  row.method = ingest::Method::kNtlm;
  row.group = 3;
  row.observed = 12;
  row.hpdi_upper = 9.0;
  row.flagged = true;
  row.model = models::ModelId::kM4;
  row.grouping = clustering::GroupingMethod::kGmm;
  report.rows.push_back(row);
  std::ostringstream out;
  detect::write_alerts_csv(out, report);
  CHECK(out.str() ==
        "user,bucket,method,group,observed,hpdi_upper,flagged,model,grouping\n"
        "alice,2024-01-01T00:00:00Z,ntlm,3,12,9,1,m4,gmm\n");
}
