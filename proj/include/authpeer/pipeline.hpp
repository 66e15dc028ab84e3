#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "authpeer/clustering.hpp"
#include "authpeer/detect.hpp"
#include "authpeer/evaluate.hpp"
#include "authpeer/inference.hpp"
#include "authpeer/ingest.hpp"
#include "authpeer/models.hpp"
#include "authpeer/synth.hpp"

namespace authpeer::pipeline {

// Exit-status contract shared with the C API and CLI.
enum Status : int {
  kOk = 0,
  kInputError = 1,
  kConvergenceFailure = 2,
  kInternalError = 3,
};

// Versioned fitted-model artifact; latent names come from the ParamIndex
// layout so the file is self-describing.
struct FittedArtifact {
  int version = 1;
  models::ModelId model = models::ModelId::kM1;
  clustering::GroupingMethod grouping = clustering::GroupingMethod::kHr;
  int k = 1;
  std::vector<uint64_t> seeds;  // one per gate fit; first is the primary
  int steps = 0;
  double lr = 0.0;
  int mc_samples = 0;
  double max_r_hat = 0.0;
  bool converged = false;
  inference::VariationalParams params;  // primary fit
};

void write_artifact_json(std::ostream& out, const FittedArtifact& artifact);
FittedArtifact read_artifact_json(std::istream& in);

void write_groups_csv(std::ostream& out, const clustering::GroupAssignment& groups);
clustering::GroupAssignment read_groups_csv(std::istream& in, clustering::GroupingMethod method);

detect::AnomalyReport read_alerts_csv(std::istream& in);

// Runs one named subcommand (simulate, ingest, cluster, fit, detect,
// evaluate, report, pipeline) with JSON options mirroring the CLI flags.
// Returns a Status; on failure *error carries the message.
int run_command(const std::string& command, const nlohmann::json& options, std::string* error);

// In-memory pipeline pieces, shared by the subcommands and the grid runner.
struct IngestResult {
  ingest::Dataset dataset;
  std::vector<ingest::RawEvent> train_events;  // filtered, train window, retained users
};

IngestResult ingest_events(const std::vector<ingest::RawEvent>& raw, int train_days,
                           int test_days, int min_train_obs);

clustering::GroupAssignment compute_grouping(
    clustering::GroupingMethod method, const IngestResult& ingested,
    const std::map<std::string, std::string>& hr_table,
    const std::map<std::string, int>& true_groups, int k_min, int k_max, uint64_t seed);

FittedArtifact fit_model(models::ModelId model, const std::vector<ingest::HourlyCount>& train,
                         const clustering::GroupAssignment& groups,
                         const inference::SviOptions& options, int n_fits, int rhat_draws,
                         uint64_t seed);

detect::AnomalyReport detect_anomalies(const FittedArtifact& artifact,
                                       const std::vector<ingest::HourlyCount>& test,
                                       const clustering::GroupAssignment& groups, double alpha,
                                       int n_draws, uint64_t seed);

nlohmann::json evaluate_combo(const FittedArtifact& artifact,
                              const std::vector<ingest::HourlyCount>& train,
                              const clustering::GroupAssignment& groups,
                              const detect::AnomalyReport& report,
                              const std::optional<synth::GroundTruth>& truth, int lags,
                              double level, int waic_draws, uint64_t seed);

}  // namespace authpeer::pipeline
