// Command-line front end; all work happens behind the C API in libauthpeer.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "authpeer/authpeer.h"

namespace {

using nlohmann::json;

int run(const std::string& command, const json& options) {
  authpeer_ctx* ctx = authpeer_ctx_new();
  if (ctx == nullptr) {
    std::fprintf(stderr, "authpeer: out of memory\n");
    return AUTHPEER_ERR_INTERNAL;
  }
  authpeer_status status = authpeer_run(ctx, command.c_str(), options.dump().c_str());
  if (status != AUTHPEER_OK) {
    const char* message = authpeer_ctx_error(ctx);
    if (message != nullptr && message[0] != '\0')
      std::fprintf(stderr, "authpeer %s: %s\n", command.c_str(), message);
    if (status == AUTHPEER_ERR_CONVERGENCE)
      std::fprintf(stderr, "authpeer %s: convergence gate failed (outputs written)\n",
                   command.c_str());
  }
  authpeer_ctx_free(ctx);
  return static_cast<int>(status);
}

struct CommonFlags {
  uint64_t seed = 7;
  bool has_seed = false;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Peer-group Bayesian anomaly detection for authentication logs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(authpeer_version()));

  json options = json::object();
  std::string command;

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option_function<uint64_t>(
        "--seed", [&](uint64_t v) { options["seed"] = v; }, "Base RNG seed (default 7)");
  };
  auto add_split = [&](CLI::App* cmd) {
    cmd->add_option_function<int>(
        "--train-days", [&](int v) { options["train_days"] = v; }, "Training days (default 20)");
    cmd->add_option_function<int>(
        "--test-days", [&](int v) { options["test_days"] = v; }, "Test days (default 7)");
    cmd->add_option_function<int>(
        "--min-train-obs", [&](int v) { options["min_train_obs"] = v; },
        "Minimum training rows per user (default 10)");
  };
  auto add_events = [&](CLI::App* cmd, bool required) {
    auto* opt = cmd->add_option_function<std::string>(
        "--events", [&](const std::string& v) { options["events"] = v; },
        "Events file (JSONL or CSV)");
    if (required) opt->required();
    cmd->add_option_function<std::string>(
        "--format", [&](const std::string& v) { options["format"] = v; },
        "Event file format: jsonl|csv (default jsonl)");
  };
  auto add_fit_params = [&](CLI::App* cmd) {
    cmd->add_option_function<int>(
        "--steps", [&](int v) { options["steps"] = v; }, "SVI steps (default 5000)");
    cmd->add_option_function<double>(
        "--lr", [&](double v) { options["lr"] = v; }, "Adam learning rate (default 0.01)");
    cmd->add_option_function<int>(
        "--mc-samples", [&](int v) { options["mc_samples"] = v; },
        "ELBO Monte Carlo samples per step (default 8)");
    cmd->add_option_function<int>(
        "--seeds", [&](int v) { options["seeds"] = v; },
        "Independent fits for the r_hat gate (default 2)");
    cmd->add_option_function<int>(
        "--rhat-draws", [&](int v) { options["rhat_draws"] = v; },
        "Draws per fit for r_hat (default 1000)");
  };

  // simulate
  {
    auto* cmd = app.add_subcommand("simulate", "Generate a labeled synthetic event stream");
    cmd->add_option_function<std::string>(
        "--scenario", [&](const std::string& v) { options["scenario"] = v; },
        "default | default-noattack | fourblock | path to scenario JSON");
    cmd->add_option_function<std::string>(
           "--out-events", [&](const std::string& v) { options["out_events"] = v; },
           "Output events JSONL")
        ->required();
    cmd->add_option_function<std::string>(
        "--out-truth", [&](const std::string& v) { options["out_truth"] = v; },
        "Output ground-truth JSON");
    cmd->add_option_function<std::string>(
        "--out-hr", [&](const std::string& v) { options["out_hr"] = v; }, "Output HR CSV");
    cmd->add_option_function<std::string>(
        "--out-scenario", [&](const std::string& v) { options["out_scenario"] = v; },
        "Echo resolved scenario JSON");
    add_seed(cmd);
    cmd->callback([&] { command = "simulate"; });
  }
  // ingest
  {
    auto* cmd = app.add_subcommand("ingest", "Parse, filter, aggregate and split events");
    add_events(cmd, true);
    cmd->add_flag_function(
        "--strict", [&](int64_t) { options["strict"] = true; },
        "Fail on the first malformed line");
    add_split(cmd);
    cmd->add_option_function<std::string>(
           "--out-train", [&](const std::string& v) { options["out_train"] = v; },
           "Training counts CSV")
        ->required();
    cmd->add_option_function<std::string>(
           "--out-test", [&](const std::string& v) { options["out_test"] = v; },
           "Test counts CSV")
        ->required();
    cmd->callback([&] { command = "ingest"; });
  }
  // cluster
  {
    auto* cmd = app.add_subcommand("cluster", "Assign users to peer groups");
    add_events(cmd, true);
    add_split(cmd);
    cmd->add_option_function<std::string>(
           "--grouping", [&](const std::string& v) { options["grouping"] = v; },
           "hr | ts | kmeans | gmm | bicluster | true")
        ->required();
    cmd->add_option_function<std::string>(
        "--hr", [&](const std::string& v) { options["hr"] = v; }, "HR table CSV (user,division)");
    cmd->add_option_function<std::string>(
        "--truth", [&](const std::string& v) { options["truth"] = v; }, "Ground-truth JSON");
    cmd->add_option_function<int>(
        "--kmin", [&](int v) { options["kmin"] = v; }, "Smallest k searched (default 1)");
    cmd->add_option_function<int>(
        "--kmax", [&](int v) { options["kmax"] = v; }, "Largest k searched (default 10)");
    cmd->add_option_function<std::string>(
           "--out-groups", [&](const std::string& v) { options["out_groups"] = v; },
           "Groups CSV (user,group_id)")
        ->required();
    add_seed(cmd);
    cmd->callback([&] { command = "cluster"; });
  }
  // fit
  {
    auto* cmd = app.add_subcommand("fit", "Fit one model by SVI with the r_hat gate");
    cmd->add_option_function<std::string>(
           "--train", [&](const std::string& v) { options["train"] = v; }, "Training counts CSV")
        ->required();
    cmd->add_option_function<std::string>(
           "--groups", [&](const std::string& v) { options["groups"] = v; }, "Groups CSV")
        ->required();
    cmd->add_option_function<std::string>(
           "--grouping", [&](const std::string& v) { options["grouping"] = v; },
           "Grouping method the groups file came from")
        ->required();
    cmd->add_option_function<std::string>(
           "--model", [&](const std::string& v) { options["model"] = v; }, "m1..m6")
        ->required();
    add_fit_params(cmd);
    cmd->add_option_function<std::string>(
           "--out-fit", [&](const std::string& v) { options["out_fit"] = v; },
           "Fitted-model artifact JSON")
        ->required();
    add_seed(cmd);
    cmd->callback([&] { command = "fit"; });
  }
  // detect
  {
    auto* cmd = app.add_subcommand("detect", "Flag test observations above the HPDI upper limit");
    cmd->add_option_function<std::string>(
           "--test", [&](const std::string& v) { options["test"] = v; }, "Test counts CSV")
        ->required();
    cmd->add_option_function<std::string>(
           "--groups", [&](const std::string& v) { options["groups"] = v; }, "Groups CSV")
        ->required();
    cmd->add_option_function<std::string>(
           "--fit", [&](const std::string& v) { options["fit"] = v; }, "Fitted-model artifact")
        ->required();
    cmd->add_option_function<double>(
        "--alpha", [&](double v) { options["alpha"] = v; }, "HPDI significance (default 0.01)");
    cmd->add_option_function<int>(
        "--draws", [&](int v) { options["draws"] = v; },
        "Posterior predictive draws per cell (default 4000)");
    cmd->add_option_function<std::string>(
           "--out-alerts", [&](const std::string& v) { options["out_alerts"] = v; }, "Alerts CSV")
        ->required();
    add_seed(cmd);
    cmd->callback([&] { command = "detect"; });
  }
  // evaluate
  {
    auto* cmd = app.add_subcommand("evaluate", "WAIC, residual diagnostics and labeled metrics");
    cmd->add_option_function<std::string>(
           "--train", [&](const std::string& v) { options["train"] = v; }, "Training counts CSV")
        ->required();
    cmd->add_option_function<std::string>(
           "--groups", [&](const std::string& v) { options["groups"] = v; }, "Groups CSV")
        ->required();
    cmd->add_option_function<std::string>(
           "--fit", [&](const std::string& v) { options["fit"] = v; }, "Fitted-model artifact")
        ->required();
    cmd->add_option_function<std::string>(
           "--alerts", [&](const std::string& v) { options["alerts"] = v; }, "Alerts CSV")
        ->required();
    cmd->add_option_function<std::string>(
        "--truth", [&](const std::string& v) { options["truth"] = v; }, "Ground-truth JSON");
    cmd->add_option_function<int>(
        "--lags", [&](int v) { options["lags"] = v; }, "Ljung-Box lags (default 10)");
    cmd->add_option_function<double>(
        "--level", [&](double v) { options["level"] = v; },
        "Diagnostic test level (default 0.05)");
    cmd->add_option_function<int>(
        "--waic-draws", [&](int v) { options["waic_draws"] = v; },
        "Posterior draws for WAIC (default 1000)");
    cmd->add_option_function<std::string>(
           "--out-metrics", [&](const std::string& v) { options["out_metrics"] = v; },
           "Metrics JSON")
        ->required();
    add_seed(cmd);
    cmd->callback([&] { command = "evaluate"; });
  }
  // report
  {
    auto* cmd = app.add_subcommand("report", "Combine metrics into rate and WAIC matrices");
    cmd->add_option_function<std::vector<std::string>>(
           "--metrics",
           [&](const std::vector<std::string>& v) { options["metrics"] = v; },
           "Metrics JSON files")
        ->required()
        ->expected(-1);
    cmd->add_option_function<std::string>(
        "--out-rates", [&](const std::string& v) { options["out_rates"] = v; },
        "Alert-rate matrix JSON");
    cmd->add_option_function<std::string>(
        "--out-waic", [&](const std::string& v) { options["out_waic"] = v; },
        "WAIC matrix JSON");
    cmd->add_option_function<std::string>(
        "--out-metrics", [&](const std::string& v) { options["out_metrics"] = v; },
        "Combined metrics JSON");
    cmd->callback([&] { command = "report"; });
  }
  // pipeline
  {
    auto* cmd = app.add_subcommand(
        "pipeline", "simulate? -> ingest -> cluster -> fit -> detect -> evaluate -> report");
    add_events(cmd, false);
    cmd->add_option_function<std::string>(
        "--scenario", [&](const std::string& v) { options["scenario"] = v; },
        "Scenario when no events file is given");
    cmd->add_option_function<std::string>(
        "--hr", [&](const std::string& v) { options["hr"] = v; }, "HR table CSV");
    cmd->add_option_function<std::string>(
        "--truth", [&](const std::string& v) { options["truth"] = v; }, "Ground-truth JSON");
    cmd->add_option_function<std::string>(
           "--out", [&](const std::string& v) { options["out"] = v; }, "Output directory")
        ->required();
    add_split(cmd);
    cmd->add_option_function<std::vector<std::string>>(
        "--grouping",
        [&](const std::vector<std::string>& v) {
          if (v.size() == 1 && v.front() == "all")
            options["groupings"] = "all";
          else
            options["groupings"] = v;
        },
        "hr|ts|kmeans|gmm|bicluster|true|all (repeatable, default all)");
    cmd->add_option_function<std::vector<std::string>>(
        "--model",
        [&](const std::vector<std::string>& v) {
          if (v.size() == 1 && v.front() == "all")
            options["models"] = "all";
          else
            options["models"] = v;
        },
        "m1..m6|all (repeatable, default all)");
    add_fit_params(cmd);
    cmd->add_option_function<double>(
        "--alpha", [&](double v) { options["alpha"] = v; }, "HPDI significance (default 0.01)");
    cmd->add_option_function<int>(
        "--draws", [&](int v) { options["draws"] = v; },
        "Posterior predictive draws per cell (default 4000)");
    cmd->add_option_function<int>(
        "--waic-draws", [&](int v) { options["waic_draws"] = v; },
        "Posterior draws for WAIC (default 1000)");
    cmd->add_option_function<int>(
        "--lags", [&](int v) { options["lags"] = v; }, "Ljung-Box lags (default 10)");
    cmd->add_option_function<int>(
        "--kmin", [&](int v) { options["kmin"] = v; }, "Smallest k searched (default 1)");
    cmd->add_option_function<int>(
        "--kmax", [&](int v) { options["kmax"] = v; }, "Largest k searched (default 10)");
    cmd->add_option_function<int>(
        "--jobs", [&](int v) { options["jobs"] = v; }, "Concurrent grid cells (default 1)");
    cmd->add_flag_function(
        "--force", [&](int64_t) { options["force"] = true; }, "Overwrite existing outputs");
    add_seed(cmd);
    cmd->callback([&] { command = "pipeline"; });
  }

  CLI11_PARSE(app, argc, argv);
  if (command.empty()) {
    std::fprintf(stderr, "authpeer: no subcommand\n");
    return AUTHPEER_ERR_INPUT;
  }
  return run(command, options);
}
