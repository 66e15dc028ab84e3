#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "authpeer/errors.hpp"
#include "authpeer/log.hpp"
#include "authpeer/pipeline.hpp"
#include "authpeer/rng.hpp"

namespace authpeer::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file: " + path);
  return in;
}

// write-temp-then-rename so partial output never lands under the final name
void atomic_write(const std::string& path, const std::string& content) {
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw InputError("cannot open output file: " + tmp.string());
    out << content;
  }
  fs::rename(tmp, target);
}

ingest::Format format_from_options(const json& options) {
  std::string format = options.value("format", "jsonl");
  if (format == "jsonl") return ingest::Format::kJsonl;
  if (format == "csv") return ingest::Format::kCsv;
  throw InputError("unknown event format: " + format);
}

std::vector<ingest::RawEvent> load_events_file(const std::string& path, const json& options) {
  auto in = open_input(path);
  auto parsed = ingest::parse_events(in, format_from_options(options),
                                     options.value("strict", false));
  return std::move(parsed.events);
}

synth::ScenarioConfig resolve_scenario(const json& options) {
  std::string name = options.value("scenario", "default");
  uint64_t seed = options.value("seed", 7ULL);
  if (name == "default") return synth::default_scenario(seed, true);
  if (name == "default-noattack") return synth::default_scenario(seed, false);
  if (name == "fourblock") return synth::four_block_scenario(seed);
  auto in = open_input(name);
  synth::ScenarioConfig config = synth::scenario_from_json(in);
  if (options.contains("seed")) config.seed = seed;
  return config;
}

struct SplitOptions {
  int train_days;
  int test_days;
  int min_train_obs;
};

SplitOptions split_options(const json& options) {
  return {options.value("train_days", 20), options.value("test_days", 7),
          options.value("min_train_obs", 10)};
}

inference::SviOptions svi_options(const json& options) {
  inference::SviOptions svi;
  svi.steps = options.value("steps", 5000);
  svi.lr = options.value("lr", 0.01);
  svi.mc_samples = options.value("mc_samples", 8);
  return svi;
}

clustering::GroupingMethod grouping_arg(const std::string& name) {
  auto method = clustering::grouping_from_name(name);
  if (!method) throw InputError("unknown grouping: " + name);
  return *method;
}

std::map<std::string, std::string> read_hr_file(const std::string& path) {
  auto in = open_input(path);
  return synth::read_hr_csv(in);
}

std::optional<synth::GroundTruth> maybe_truth(const json& options) {
  if (!options.contains("truth")) return std::nullopt;
  auto in = open_input(options.at("truth").get<std::string>());
  return synth::read_truth_json(in);
}

uint64_t tag_seed(uint64_t base, const std::string& tag) {
  return mix_seed(base, stable_hash64(tag));
}

// Completely pooled models ignore the grouping; sharing one seed keeps their
// results byte-identical across grouping columns, like the paper's tables.
std::string fit_tag(models::ModelId model, clustering::GroupingMethod grouping) {
  const models::ModelSpec spec = models::ModelSpec::make(model, 1);
  std::string tag = models::model_name(model);
  if (spec.uses_groups) tag += std::string(":") + clustering::grouping_name(grouping);
  return tag;
}

int cmd_simulate(const json& options) {
  synth::ScenarioConfig config = resolve_scenario(options);
  synth::Generated generated = synth::generate_scenario(config);
  {
    std::ostringstream out;
    synth::write_events_jsonl(out, generated.events);
    atomic_write(options.at("out_events").get<std::string>(), out.str());
  }
  if (options.contains("out_truth")) {
    std::ostringstream out;
    synth::write_truth_json(out, generated.truth);
    atomic_write(options.at("out_truth").get<std::string>(), out.str());
  }
  if (options.contains("out_hr")) {
    std::ostringstream out;
    synth::write_hr_csv(out, generated.hr);
    atomic_write(options.at("out_hr").get<std::string>(), out.str());
  }
  if (options.contains("out_scenario")) {
    std::ostringstream out;
    synth::write_scenario_json(out, config);
    atomic_write(options.at("out_scenario").get<std::string>(), out.str());
  }
  logging::info("simulate: " + std::to_string(generated.events.size()) + " events, " +
                std::to_string(generated.truth.attacks.size()) + " attack keys");
  return kOk;
}

int cmd_ingest(const json& options) {
  auto events = load_events_file(options.at("events").get<std::string>(), options);
  SplitOptions split = split_options(options);
  IngestResult result =
      ingest_events(events, split.train_days, split.test_days, split.min_train_obs);
  {
    std::ostringstream out;
    ingest::write_counts_csv(out, result.dataset.train);
    atomic_write(options.at("out_train").get<std::string>(), out.str());
  }
  {
    std::ostringstream out;
    ingest::write_counts_csv(out, result.dataset.test);
    atomic_write(options.at("out_test").get<std::string>(), out.str());
  }
  logging::info("ingest: " + std::to_string(result.dataset.users.size()) + " users, " +
                std::to_string(result.dataset.train.size()) + " train rows, " +
                std::to_string(result.dataset.test.size()) + " test rows");
  return kOk;
}

int cmd_cluster(const json& options) {
  auto events = load_events_file(options.at("events").get<std::string>(), options);
  SplitOptions split = split_options(options);
  IngestResult result =
      ingest_events(events, split.train_days, split.test_days, split.min_train_obs);
  clustering::GroupingMethod method = grouping_arg(options.at("grouping").get<std::string>());
  std::map<std::string, std::string> hr;
  if (options.contains("hr")) hr = read_hr_file(options.at("hr").get<std::string>());
  auto truth = maybe_truth(options);
  std::map<std::string, int> true_groups;
  if (truth.has_value()) true_groups = truth->groups;
  uint64_t seed = tag_seed(options.value("seed", 7ULL),
                           std::string("cluster:") + clustering::grouping_name(method));
  clustering::GroupAssignment groups =
      compute_grouping(method, result, hr, true_groups, options.value("kmin", 1),
                       options.value("kmax", 10), seed);
  std::ostringstream out;
  write_groups_csv(out, groups);
  atomic_write(options.at("out_groups").get<std::string>(), out.str());
  logging::info(std::string("cluster: ") + clustering::grouping_name(method) +
                " -> k=" + std::to_string(groups.k));
  return kOk;
}

int cmd_fit(const json& options) {
  auto train_in = open_input(options.at("train").get<std::string>());
  auto train = ingest::read_counts_csv(train_in);
  clustering::GroupingMethod method = grouping_arg(options.at("grouping").get<std::string>());
  auto groups_in = open_input(options.at("groups").get<std::string>());
  clustering::GroupAssignment groups = read_groups_csv(groups_in, method);
  auto model = models::model_from_name(options.at("model").get<std::string>());
  if (!model) throw InputError("unknown model: " + options.at("model").get<std::string>());
  uint64_t seed = tag_seed(options.value("seed", 7ULL), "fit:" + fit_tag(*model, method));
  FittedArtifact artifact =
      fit_model(*model, train, groups, svi_options(options), options.value("seeds", 2),
                options.value("rhat_draws", 1000), seed);
  std::ostringstream out;
  write_artifact_json(out, artifact);
  atomic_write(options.at("out_fit").get<std::string>(), out.str());
  logging::info(std::string("fit: ") + models::model_name(*model) +
                " max_r_hat=" + std::to_string(artifact.max_r_hat));
  return artifact.converged ? kOk : kConvergenceFailure;
}

int cmd_detect(const json& options) {
  auto test_in = open_input(options.at("test").get<std::string>());
  auto test = ingest::read_counts_csv(test_in);
  auto fit_in = open_input(options.at("fit").get<std::string>());
  FittedArtifact artifact = read_artifact_json(fit_in);
  auto groups_in = open_input(options.at("groups").get<std::string>());
  clustering::GroupAssignment groups = read_groups_csv(groups_in, artifact.grouping);
  if (groups.k != artifact.k) throw InputError("detect: groups file does not match artifact k");
  uint64_t seed = tag_seed(options.value("seed", 7ULL),
                           "detect:" + fit_tag(artifact.model, artifact.grouping));
  detect::AnomalyReport report =
      detect_anomalies(artifact, test, groups, options.value("alpha", 0.01),
                       options.value("draws", 4000), seed);
  std::ostringstream out;
  detect::write_alerts_csv(out, report);
  atomic_write(options.at("out_alerts").get<std::string>(), out.str());
  logging::info("detect: alert rate " +
                std::to_string(report.rows.empty() ? 0.0 : detect::alert_rate(report)));
  return kOk;
}

int cmd_evaluate(const json& options) {
  auto train_in = open_input(options.at("train").get<std::string>());
  auto train = ingest::read_counts_csv(train_in);
  auto fit_in = open_input(options.at("fit").get<std::string>());
  FittedArtifact artifact = read_artifact_json(fit_in);
  auto groups_in = open_input(options.at("groups").get<std::string>());
  clustering::GroupAssignment groups = read_groups_csv(groups_in, artifact.grouping);
  auto alerts_in = open_input(options.at("alerts").get<std::string>());
  detect::AnomalyReport all_alerts = read_alerts_csv(alerts_in);
  detect::AnomalyReport report;
  for (auto& row : all_alerts.rows)
    if (row.model == artifact.model && row.grouping == artifact.grouping)
      report.rows.push_back(std::move(row));
  auto truth = maybe_truth(options);
  uint64_t seed = tag_seed(options.value("seed", 7ULL),
                           "eval:" + fit_tag(artifact.model, artifact.grouping));
  json metrics =
      evaluate_combo(artifact, train, groups, report, truth, options.value("lags", 10),
                     options.value("level", 0.05), options.value("waic_draws", 1000), seed);
  atomic_write(options.at("out_metrics").get<std::string>(), metrics.dump(2) + "\n");
  return kOk;
}

int cmd_report(const json& options) {
  json combined = json::array();
  for (const auto& path : options.at("metrics")) {
    auto in = open_input(path.get<std::string>());
    json j = json::parse(in);
    if (j.is_array())
      for (auto& item : j) combined.push_back(item);
    else
      combined.push_back(j);
  }
  json rates = json::object(), elpd = json::object();
  for (const auto& item : combined) {
    std::string model = item.at("model").get<std::string>();
    std::string grouping = item.at("grouping").get<std::string>();
    rates[model][grouping] = item.at("alert_rate");
    elpd[model][grouping] = item.at("elpd_waic");
  }
  if (options.contains("out_rates"))
    atomic_write(options.at("out_rates").get<std::string>(),
                 json{{"rates", rates}}.dump(2) + "\n");
  if (options.contains("out_waic"))
    atomic_write(options.at("out_waic").get<std::string>(),
                 json{{"elpd_waic", elpd}}.dump(2) + "\n");
  if (options.contains("out_metrics"))
    atomic_write(options.at("out_metrics").get<std::string>(), combined.dump(2) + "\n");
  return kOk;
}

std::vector<clustering::GroupingMethod> grouping_list(const json& options) {
  std::vector<clustering::GroupingMethod> methods;
  json raw = options.value("groupings", json("all"));
  if (raw.is_string() && raw.get<std::string>() == "all") {
    methods = {clustering::GroupingMethod::kHr, clustering::GroupingMethod::kTs,
               clustering::GroupingMethod::kKmeans, clustering::GroupingMethod::kGmm,
               clustering::GroupingMethod::kBicluster};
  } else if (raw.is_array()) {
    for (const auto& name : raw) methods.push_back(grouping_arg(name.get<std::string>()));
  } else {
    methods.push_back(grouping_arg(raw.get<std::string>()));
  }
  if (methods.empty()) throw InputError("pipeline: no groupings requested");
  return methods;
}

std::vector<models::ModelId> model_list(const json& options) {
  std::vector<models::ModelId> ids;
  json raw = options.value("models", json("all"));
  if (raw.is_string() && raw.get<std::string>() == "all") {
    ids = {models::ModelId::kM1, models::ModelId::kM2, models::ModelId::kM3,
           models::ModelId::kM4, models::ModelId::kM5, models::ModelId::kM6};
  } else if (raw.is_array()) {
    for (const auto& name : raw) {
      auto id = models::model_from_name(name.get<std::string>());
      if (!id) throw InputError("unknown model: " + name.get<std::string>());
      ids.push_back(*id);
    }
  } else {
    auto id = models::model_from_name(raw.get<std::string>());
    if (!id) throw InputError("unknown model: " + raw.get<std::string>());
    ids.push_back(*id);
  }
  if (ids.empty()) throw InputError("pipeline: no models requested");
  return ids;
}

struct GridResult {
  FittedArtifact artifact;
  detect::AnomalyReport report;
  json metrics;
  std::exception_ptr error;
};

int cmd_pipeline(const json& options) {
  const std::string out_dir = options.at("out").get<std::string>();
  const bool force = options.value("force", false);
  for (const char* name : {"metrics.json", "alerts.csv", "rates.json", "waic.json"}) {
    fs::path existing = fs::path(out_dir) / name;
    if (fs::exists(existing) && !force)
      throw InputError("refusing to overwrite " + existing.string() + " (use --force)");
  }
  fs::create_directories(out_dir);
  const uint64_t base_seed = options.value("seed", 7ULL);
  const double alpha = options.value("alpha", 0.01);
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("pipeline: alpha must be in (0,1)");
  const int n_fits = options.value("seeds", 2);
  if (n_fits < 2) throw InputError("pipeline: need at least 2 seeds for the r_hat gate");
  auto out_path = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };

  // events: simulated here unless supplied
  std::string events_path;
  std::optional<synth::GroundTruth> truth = maybe_truth(options);
  std::map<std::string, std::string> hr;
  if (options.contains("hr")) hr = read_hr_file(options.at("hr").get<std::string>());
  if (options.contains("events")) {
    events_path = options.at("events").get<std::string>();
  } else {
    if (!options.contains("scenario"))
      throw InputError("pipeline: need either events or a scenario");
    json sim = options;
    sim["out_events"] = out_path("events.jsonl");
    sim["out_truth"] = out_path("truth.json");
    sim["out_hr"] = out_path("hr.csv");
    sim["out_scenario"] = out_path("scenario.json");
    cmd_simulate(sim);
    events_path = out_path("events.jsonl");
    if (!truth.has_value()) {
      auto in = open_input(out_path("truth.json"));
      truth = synth::read_truth_json(in);
    }
    if (hr.empty()) hr = read_hr_file(out_path("hr.csv"));
  }

  auto events = load_events_file(events_path, options);
  SplitOptions split = split_options(options);
  IngestResult ingested =
      ingest_events(events, split.train_days, split.test_days, split.min_train_obs);
  {
    std::ostringstream out;
    ingest::write_counts_csv(out, ingested.dataset.train);
    atomic_write(out_path("train.csv"), out.str());
  }
  {
    std::ostringstream out;
    ingest::write_counts_csv(out, ingested.dataset.test);
    atomic_write(out_path("test.csv"), out.str());
  }

  auto methods = grouping_list(options);
  auto ids = model_list(options);
  for (auto method : methods) {
    if (method == clustering::GroupingMethod::kHr && hr.empty())
      throw InputError("pipeline: hr grouping requested but no hr table available");
    if (method == clustering::GroupingMethod::kTrue && !truth.has_value())
      throw InputError("pipeline: true grouping requested but no truth file available");
  }

  std::map<clustering::GroupingMethod, clustering::GroupAssignment> groupings;
  for (auto method : methods) {
    uint64_t seed =
        tag_seed(base_seed, std::string("cluster:") + clustering::grouping_name(method));
    groupings[method] = compute_grouping(method, ingested, hr,
                                         truth.has_value() ? truth->groups
                                                           : std::map<std::string, int>{},
                                         options.value("kmin", 1), options.value("kmax", 10),
                                         seed);
    std::ostringstream out;
    write_groups_csv(out, groupings[method]);
    atomic_write(out_path(std::string("groups_") + clustering::grouping_name(method) + ".csv"),
                 out.str());
    logging::info(std::string("pipeline: grouping ") + clustering::grouping_name(method) +
                  " k=" + std::to_string(groupings[method].k));
  }

  struct GridCell {
    models::ModelId model;
    clustering::GroupingMethod grouping;
  };
  std::vector<GridCell> cells;
  for (auto model : ids)
    for (auto method : methods) cells.push_back({model, method});

  const inference::SviOptions svi = svi_options(options);
  const int rhat_draws = options.value("rhat_draws", 1000);
  const int draws = options.value("draws", 4000);
  const int waic_draws = options.value("waic_draws", 1000);
  const int lags = options.value("lags", 10);
  const double level = options.value("level", 0.05);

  std::vector<GridResult> results(cells.size());
  std::atomic<size_t> cursor{0};
  auto worker = [&]() {
    for (size_t i = cursor.fetch_add(1); i < cells.size(); i = cursor.fetch_add(1)) {
      GridResult& slot = results[i];
      try {
        const auto& cell = cells[i];
        const auto& groups = groupings.at(cell.grouping);
        std::string tag = fit_tag(cell.model, cell.grouping);
        slot.artifact = fit_model(cell.model, ingested.dataset.train, groups, svi, n_fits,
                                  rhat_draws, tag_seed(base_seed, "fit:" + tag));
        slot.artifact.grouping = cell.grouping;
        slot.report = detect_anomalies(slot.artifact, ingested.dataset.test, groups, alpha,
                                       draws, tag_seed(base_seed, "detect:" + tag));
        slot.metrics = evaluate_combo(slot.artifact, ingested.dataset.train, groups, slot.report,
                                      truth, lags, level, waic_draws,
                                      tag_seed(base_seed, "eval:" + tag));
      } catch (...) {
        slot.error = std::current_exception();
      }
    }
  };
  int jobs = std::max(1, options.value("jobs", 1));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min<int>(jobs, static_cast<int>(cells.size())); ++t)
      pool.emplace_back(worker);
    for (auto& thread : pool) thread.join();
  }
  for (const auto& slot : results)
    if (slot.error) std::rethrow_exception(slot.error);

  // artifacts and combined outputs, in grid order
  bool all_converged = true;
  std::ostringstream alerts;
  json metrics = json::array();
  json rates = json::object(), elpd = json::object();
  bool first_alert_block = true;
  for (size_t i = 0; i < cells.size(); ++i) {
    const auto& cell = cells[i];
    const auto& slot = results[i];
    std::string stem = std::string("fit_") + models::model_name(cell.model) + "_" +
                       clustering::grouping_name(cell.grouping);
    std::ostringstream fit_out;
    write_artifact_json(fit_out, slot.artifact);
    atomic_write(out_path(stem + ".json"), fit_out.str());
    detect::write_alerts_csv(alerts, slot.report, first_alert_block);
    first_alert_block = false;
    metrics.push_back(slot.metrics);
    rates[models::model_name(cell.model)][clustering::grouping_name(cell.grouping)] =
        slot.metrics.at("alert_rate");
    elpd[models::model_name(cell.model)][clustering::grouping_name(cell.grouping)] =
        slot.metrics.at("elpd_waic");
    all_converged = all_converged && slot.artifact.converged;
  }
  atomic_write(out_path("alerts.csv"), alerts.str());
  atomic_write(out_path("metrics.json"), metrics.dump(2) + "\n");
  atomic_write(out_path("rates.json"), json{{"alpha", alpha}, {"rates", rates}}.dump(2) + "\n");
  atomic_write(out_path("waic.json"), json{{"elpd_waic", elpd}}.dump(2) + "\n");
  {
    json echo = options;
    echo["resolved_groupings"] = json::array();
    for (auto method : methods)
      echo["resolved_groupings"].push_back(clustering::grouping_name(method));
    atomic_write(out_path("config.json"), echo.dump(2) + "\n");
  }
  if (!all_converged) {
    logging::warn("pipeline: at least one fit failed the r_hat gate");
    return kConvergenceFailure;
  }
  return kOk;
}

}  // namespace

int run_command(const std::string& command, const json& options, std::string* error) {
  try {
    if (command == "simulate") return cmd_simulate(options);
    if (command == "ingest") return cmd_ingest(options);
    if (command == "cluster") return cmd_cluster(options);
    if (command == "fit") return cmd_fit(options);
    if (command == "detect") return cmd_detect(options);
    if (command == "evaluate") return cmd_evaluate(options);
    if (command == "report") return cmd_report(options);
    if (command == "pipeline") return cmd_pipeline(options);
    if (error != nullptr) *error = "unknown command: " + command;
    return kInputError;
  } catch (const InputError& e) {
    if (error != nullptr) *error = e.what();
    logging::error(e.what());
    return kInputError;
  } catch (const std::exception& e) {
    if (error != nullptr) *error = e.what();
    logging::error(e.what());
    return kInternalError;
  }
}

}  // namespace authpeer::pipeline
