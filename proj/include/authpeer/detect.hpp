#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "authpeer/clustering.hpp"
#include "authpeer/inference.hpp"
#include "authpeer/ingest.hpp"
#include "authpeer/models.hpp"

namespace authpeer::detect {

struct HpdiInterval {
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.0;
  double mass = 0.0;  // >= 1 - alpha; discrete draws may overshoot
};

// Shortest contiguous window of the sorted draws holding ceil((1-alpha)*n)
// samples; ties prefer the smallest lower endpoint.
HpdiInterval hpdi(std::vector<double> draws, double alpha);
HpdiInterval hpdi_counts(const std::vector<int>& draws, double alpha);

// One Poisson variate per retained posterior draw at the cell's rate.
std::vector<int> posterior_predictive(const inference::PosteriorSamples& samples,
                                      const models::ParamIndex& pidx,
                                      const models::Observation& cell, int n_draws, uint64_t seed);

struct AnomalyRow {
  std::string user;
  int64_t bucket = 0;
  ingest::Method method = ingest::Method::kKerberos;
  int group = 0;
  int observed = 0;
  double hpdi_upper = 0.0;
  bool flagged = false;
  models::ModelId model = models::ModelId::kM1;
  clustering::GroupingMethod grouping = clustering::GroupingMethod::kHr;
};

struct AnomalyReport {
  std::vector<AnomalyRow> rows;
};

// Cell key for threshold lookup: dimensions the model ignores collapse to 0.
int64_t cell_key(const models::ModelSpec& spec, const models::Observation& obs);

// Strict upper-limit rule: flagged iff observed > hpdi upper. Every test
// observation must have a threshold for its cell.
AnomalyReport flag_anomalies(const std::vector<ingest::HourlyCount>& test_rows,
                             const clustering::GroupAssignment& groups,
                             const std::map<int64_t, HpdiInterval>& thresholds,
                             models::ModelId model, clustering::GroupingMethod grouping);

double alert_rate(const AnomalyReport& report);

// Alerts CSV, header: user,bucket,method,group,observed,hpdi_upper,flagged,model,grouping
void write_alerts_csv(std::ostream& out, const AnomalyReport& report, bool header = true);

}  // namespace authpeer::detect
