#include "authpeer/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "authpeer/errors.hpp"
#include "authpeer/log.hpp"
#include "authpeer/rng.hpp"
#include "authpeer/timeutil.hpp"

namespace authpeer::pipeline {

using nlohmann::json;

void write_artifact_json(std::ostream& out, const FittedArtifact& artifact) {
  const models::ModelSpec spec = models::ModelSpec::make(artifact.model, artifact.k);
  const models::ParamIndex pidx(spec);
  json j;
  j["format"] = "authpeer-fit";
  j["version"] = artifact.version;
  j["model"] = models::model_name(artifact.model);
  j["grouping"] = clustering::grouping_name(artifact.grouping);
  j["k"] = artifact.k;
  j["seeds"] = artifact.seeds;
  j["steps"] = artifact.steps;
  j["lr"] = artifact.lr;
  j["mc_samples"] = artifact.mc_samples;
  j["max_r_hat"] = artifact.max_r_hat;
  j["converged"] = artifact.converged;
  json latents = json::array();
  for (int i = 0; i < pidx.dim(); ++i) {
    json l;
    l["name"] = pidx.name(i);
    l["mean"] = artifact.params.mean[i];
    l["log_sd"] = artifact.params.log_sd[i];
    latents.push_back(std::move(l));
  }
  j["latents"] = std::move(latents);
  out << j.dump(2) << '\n';
}

FittedArtifact read_artifact_json(std::istream& in) {
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.value("format", "") != "authpeer-fit")
    throw InputError("artifact: not an authpeer-fit file");
  FittedArtifact artifact;
  artifact.version = j.at("version").get<int>();
  auto model = models::model_from_name(j.at("model").get<std::string>());
  auto grouping = clustering::grouping_from_name(j.at("grouping").get<std::string>());
  if (!model || !grouping) throw InputError("artifact: unknown model or grouping");
  artifact.model = *model;
  artifact.grouping = *grouping;
  artifact.k = j.at("k").get<int>();
  artifact.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  artifact.steps = j.at("steps").get<int>();
  artifact.lr = j.at("lr").get<double>();
  artifact.mc_samples = j.at("mc_samples").get<int>();
  artifact.max_r_hat = j.at("max_r_hat").get<double>();
  artifact.converged = j.at("converged").get<bool>();
  const models::ParamIndex pidx(models::ModelSpec::make(artifact.model, artifact.k));
  const auto& latents = j.at("latents");
  if (static_cast<int>(latents.size()) != pidx.dim())
    throw InputError("artifact: latent count does not match model layout");
  artifact.params.mean.resize(pidx.dim());
  artifact.params.log_sd.resize(pidx.dim());
  for (int i = 0; i < pidx.dim(); ++i) {
    const auto& l = latents.at(i);
    if (l.at("name").get<std::string>() != pidx.name(i))
      throw InputError("artifact: latent name mismatch at position " + std::to_string(i));
    artifact.params.mean[i] = l.at("mean").get<double>();
    artifact.params.log_sd[i] = l.at("log_sd").get<double>();
  }
  return artifact;
}

void write_groups_csv(std::ostream& out, const clustering::GroupAssignment& groups) {
  out << "user,group_id\n";
  for (const auto& [user, gid] : groups.mapping) out << user << ',' << gid << '\n';
}

clustering::GroupAssignment read_groups_csv(std::istream& in,
                                            clustering::GroupingMethod method) {
  if (!in) throw InputError("read_groups_csv: unreadable stream");
  clustering::GroupAssignment groups;
  groups.method = method;
  std::string line;
  bool header = true;
  int max_gid = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    if (header) {
      header = false;
      continue;
    }
    auto comma = line.rfind(',');
    if (comma == std::string::npos) throw InputError("groups csv: bad line: " + line);
    std::string gid_text = line.substr(comma + 1);
    if (!gid_text.empty() && gid_text.back() == '\r') gid_text.pop_back();
    int gid = std::stoi(gid_text);
    groups.mapping[line.substr(0, comma)] = gid;
    max_gid = std::max(max_gid, gid);
  }
  groups.k = max_gid + 1;
  if (groups.k < 1) throw InputError("groups csv: no rows");
  return groups;
}

detect::AnomalyReport read_alerts_csv(std::istream& in) {
  if (!in) throw InputError("read_alerts_csv: unreadable stream");
  detect::AnomalyReport report;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur.push_back(c);
      }
    }
    fields.push_back(cur);
    if (fields.size() != 9) throw InputError("alerts csv: bad line: " + line);
    detect::AnomalyRow row;
    row.user = fields[0];
    auto bucket = timeutil::parse_iso8601_utc(fields[1]);
    if (!bucket) throw InputError("alerts csv: bad bucket: " + fields[1]);
    row.bucket = *bucket;
    row.method = fields[2] == "kerberos" ? ingest::Method::kKerberos : ingest::Method::kNtlm;
    row.group = std::stoi(fields[3]);
    row.observed = std::stoi(fields[4]);
    row.hpdi_upper = std::stod(fields[5]);
    row.flagged = fields[6] == "1" || fields[6] == "true";
    auto model = models::model_from_name(fields[7]);
    auto grouping = clustering::grouping_from_name(fields[8]);
    if (!model || !grouping) throw InputError("alerts csv: unknown model/grouping: " + line);
    row.model = *model;
    row.grouping = *grouping;
    report.rows.push_back(std::move(row));
  }
  return report;
}

IngestResult ingest_events(const std::vector<ingest::RawEvent>& raw, int train_days,
                           int test_days, int min_train_obs) {
  IngestResult result;
  std::vector<ingest::RawEvent> filtered = ingest::filter_events(raw);
  if (filtered.empty()) throw InputError("ingest: no events survive filtering");
  std::vector<ingest::HourlyCount> counts = ingest::aggregate_hourly(filtered);
  result.dataset = ingest::split_and_prune(counts, train_days, test_days, min_train_obs);

  int64_t min_ts = filtered.front().ts;
  for (const auto& ev : filtered) min_ts = std::min(min_ts, ev.ts);
  const int64_t train_end = timeutil::day_start(min_ts) + static_cast<int64_t>(train_days) * 86400;
  for (auto& ev : filtered) {
    if (ev.ts < train_end && result.dataset.users.count(ev.user) > 0)
      result.train_events.push_back(std::move(ev));
  }
  return result;
}

namespace {

clustering::GroupAssignment from_labels(const std::vector<std::string>& users,
                                        const std::vector<int>& labels,
                                        clustering::GroupingMethod method) {
  std::map<int, int> remap;
  for (int l : labels) remap.emplace(l, 0);
  int next = 0;
  for (auto& [old_id, new_id] : remap) new_id = next++;
  clustering::GroupAssignment groups;
  groups.method = method;
  groups.k = std::max(next, 1);
  for (size_t i = 0; i < users.size(); ++i) groups.mapping[users[i]] = remap[labels[i]];
  return groups;
}

// WCSS curve over k = 1..k_max with elbow selection.
int elbow_k(const Eigen::MatrixXd& points, int k_max, uint64_t seed) {
  int k_cap = std::min<int>(k_max, static_cast<int>(points.rows()));
  if (k_cap < 4) return std::min<int>(k_cap, 2);
  std::map<int, double> curve;
  for (int k = 1; k <= k_cap; ++k) curve[k] = clustering::kmeans(points, k, mix_seed(seed, k)).wcss;
  return clustering::select_k_elbow(curve);
}

}  // namespace

clustering::GroupAssignment compute_grouping(
    clustering::GroupingMethod method, const IngestResult& ingested,
    const std::map<std::string, std::string>& hr_table,
    const std::map<std::string, int>& true_groups, int k_min, int k_max, uint64_t seed) {
  const auto& dataset = ingested.dataset;
  switch (method) {
    case clustering::GroupingMethod::kHr:
      return clustering::hr_grouping(hr_table, dataset.users);
    case clustering::GroupingMethod::kTrue: {
      std::vector<std::string> users;
      std::vector<int> labels;
      for (const auto& user : dataset.users) {
        auto it = true_groups.find(user);
        if (it == true_groups.end())
          throw InputError("true grouping: user missing from truth: " + user);
        users.push_back(user);
        labels.push_back(it->second);
      }
      return from_labels(users, labels, clustering::GroupingMethod::kTrue);
    }
    case clustering::GroupingMethod::kKmeans:
    case clustering::GroupingMethod::kGmm: {
      graph::AdjacencyMatrix adj = graph::build_adjacency(ingested.train_events);
      Eigen::MatrixXd dense = adj.to_dense();
      int full_rank = static_cast<int>(std::min(dense.rows(), dense.cols()));
      graph::SvdResult svd = graph::truncated_svd(dense, full_rank);
      int rank = graph::embedding_rank(svd.singular_values);
      Eigen::MatrixXd points = svd.left.leftCols(rank);
      if (method == clustering::GroupingMethod::kKmeans) {
        int k = elbow_k(points, k_max, seed);
        auto result = clustering::kmeans(points, k, mix_seed(seed, k));
        return from_labels(adj.users, result.labels, method);
      }
      int k_cap = std::min<int>(k_max, static_cast<int>(points.rows()) - 1);
      auto result = clustering::gmm_em(points, std::min(k_min, k_cap), k_cap, seed);
      return from_labels(adj.users, result.labels, method);
    }
    case clustering::GroupingMethod::kBicluster: {
      graph::AdjacencyMatrix adj = graph::build_adjacency(ingested.train_events);
      Eigen::MatrixXd normalized = graph::bicluster_normalize(adj);
      int max_rank = static_cast<int>(std::min(normalized.rows(), normalized.cols()));
      int sel_rank =
          std::min(static_cast<int>(std::ceil(std::log2(std::max(k_max, 2)))) + 2, max_rank);
      int k = 1;
      if (sel_rank >= 2) {
        graph::SvdResult svd = graph::truncated_svd(normalized, sel_rank);
        Eigen::MatrixXd coords = svd.left.rightCols(sel_rank - 1) *
                                 svd.singular_values.tail(sel_rank - 1).asDiagonal();
        for (long u = 0; u < coords.rows(); ++u)
          coords.row(u) /= std::sqrt(static_cast<double>(adj.row_sums[u]));
        k = elbow_k(coords, k_max, seed);
      }
      auto labels = clustering::bicluster(adj, k, mix_seed(seed, 0xb1c));
      return from_labels(adj.users, labels, method);
    }
    case clustering::GroupingMethod::kTs: {
      std::map<std::string, std::vector<const ingest::HourlyCount*>> by_user;
      for (const auto& row : dataset.train) by_user[row.user].push_back(&row);
      std::vector<std::string> users;
      std::vector<std::vector<double>> series;
      for (auto& [user, rows] : by_user) {
        std::sort(rows.begin(), rows.end(),
                  [](const ingest::HourlyCount* a, const ingest::HourlyCount* b) {
                    return std::tie(a->bucket, a->method) < std::tie(b->bucket, b->method);
                  });
        std::vector<double> counts;
        counts.reserve(rows.size());
        for (const auto* row : rows) counts.push_back(row->count);
        users.push_back(user);
        series.push_back(std::move(counts));
      }
      clustering::TsFeatureResult features = clustering::ts_features(series);
      std::vector<std::string> kept_users;
      for (size_t idx : features.kept) kept_users.push_back(users[idx]);
      int k_cap = std::min<int>(k_max, static_cast<int>(kept_users.size()) - 1);
      clustering::GroupAssignment groups =
          clustering::cluster_ts(features.features, kept_users, std::min(k_min, k_cap), k_cap,
                                 seed);
      // Users whose series were too short share one extra group.
      bool any_short = false;
      for (const auto& user : users)
        if (groups.mapping.find(user) == groups.mapping.end()) {
          groups.mapping[user] = groups.k;
          any_short = true;
        }
      if (any_short) ++groups.k;
      return groups;
    }
  }
  throw InputError("compute_grouping: unknown method");
}

FittedArtifact fit_model(models::ModelId model, const std::vector<ingest::HourlyCount>& train,
                         const clustering::GroupAssignment& groups,
                         const inference::SviOptions& options, int n_fits, int rhat_draws,
                         uint64_t seed) {
  const models::ModelSpec spec = models::ModelSpec::make(model, groups.k);
  const models::ParamIndex pidx(spec);
  auto observations = models::build_observations(train, groups);
  std::vector<inference::VariationalParams> fits;
  inference::FitReport gate =
      inference::convergence_gate(pidx, observations, options, n_fits, rhat_draws, seed, &fits);
  FittedArtifact artifact;
  artifact.model = model;
  artifact.grouping = groups.method;
  artifact.k = groups.k;
  for (int i = 0; i < n_fits; ++i) artifact.seeds.push_back(mix_seed(seed, i));
  artifact.steps = options.steps;
  artifact.lr = options.lr;
  artifact.mc_samples = options.mc_samples;
  artifact.max_r_hat = gate.max_r_hat;
  artifact.converged = gate.converged;
  artifact.params = fits.front();
  return artifact;
}

detect::AnomalyReport detect_anomalies(const FittedArtifact& artifact,
                                       const std::vector<ingest::HourlyCount>& test,
                                       const clustering::GroupAssignment& groups, double alpha,
                                       int n_draws, uint64_t seed) {
  const models::ModelSpec spec = models::ModelSpec::make(artifact.model, artifact.k);
  const models::ParamIndex pidx(spec);
  inference::PosteriorSamples samples =
      inference::sample_posterior(artifact.params, n_draws, mix_seed(seed, 0xd7a));

  std::map<int64_t, models::Observation> cells;
  for (const auto& row : test) {
    auto git = groups.mapping.find(row.user);
    if (git == groups.mapping.end())
      throw InputError("detect: user without group: " + row.user);
    models::Observation obs;
    obs.y = row.count;
    obs.h = spec.uses_seasonality ? row.hour : 0;
    obs.d = spec.uses_seasonality ? row.dow : 1;
    obs.g = spec.uses_groups ? git->second : 0;
    obs.m = spec.uses_method ? (row.method == ingest::Method::kKerberos ? 1 : 2) : 1;
    cells.emplace(detect::cell_key(spec, obs), obs);
  }
  std::map<int64_t, detect::HpdiInterval> thresholds;
  for (const auto& [key, cell] : cells) {
    auto draws = detect::posterior_predictive(samples, pidx, cell, n_draws,
                                              mix_seed(seed, static_cast<uint64_t>(key)));
    thresholds[key] = detect::hpdi_counts(draws, alpha);
  }
  return detect::flag_anomalies(test, groups, thresholds, artifact.model, artifact.grouping);
}

json evaluate_combo(const FittedArtifact& artifact, const std::vector<ingest::HourlyCount>& train,
                    const clustering::GroupAssignment& groups,
                    const detect::AnomalyReport& report,
                    const std::optional<synth::GroundTruth>& truth, int lags, double level,
                    int waic_draws, uint64_t seed) {
  const models::ModelSpec spec = models::ModelSpec::make(artifact.model, artifact.k);
  const models::ParamIndex pidx(spec);
  auto observations = models::build_observations(train, groups);
  inference::PosteriorSamples samples =
      inference::sample_posterior(artifact.params, waic_draws, mix_seed(seed, 0x0a1c));
  evaluate::WaicResult waic_result = evaluate::waic(samples, pidx, observations);
  evaluate::ResidualDiagnostics diagnostics = evaluate::residual_diagnostics(
      train, groups, pidx, samples, lags, level, mix_seed(seed, 0xd1a6));

  json j;
  j["model"] = models::model_name(artifact.model);
  j["grouping"] = clustering::grouping_name(artifact.grouping);
  j["k"] = artifact.k;
  j["elpd_waic"] = waic_result.elpd_waic;
  j["lppd"] = waic_result.lppd;
  j["p_waic"] = waic_result.p_waic;
  j["jb_rejection_rate"] = diagnostics.jb_rejection_rate;
  j["lb_rejection_rate"] = diagnostics.lb_rejection_rate;
  j["alert_rate"] = report.rows.empty() ? json(nullptr) : json(detect::alert_rate(report));
  j["max_r_hat"] = artifact.max_r_hat;
  j["converged"] = artifact.converged;
  if (truth.has_value()) {
    evaluate::LabeledMetrics labeled = evaluate::labeled_metrics(report, truth->attacks);
    j["precision"] = labeled.precision.has_value() ? json(*labeled.precision) : json(nullptr);
    j["recall"] = labeled.recall.has_value() ? json(*labeled.recall) : json(nullptr);
  } else {
    j["precision"] = nullptr;
    j["recall"] = nullptr;
  }
  return j;
}

}  // namespace authpeer::pipeline
