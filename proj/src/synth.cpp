#include "authpeer/synth.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "authpeer/errors.hpp"
#include "authpeer/log.hpp"
#include "authpeer/rng.hpp"
#include "authpeer/timeutil.hpp"

namespace authpeer::synth {

namespace {

using nlohmann::json;

// One stream per (user, bucket, method) so attack injection can re-draw a
// window without disturbing any other cell.
RngStream cell_stream(uint64_t seed, const std::string& user, int64_t bucket, int m,
                      bool attack) {
  uint64_t id = stable_hash64(user) ^ (static_cast<uint64_t>(bucket) << 2) ^
                static_cast<uint64_t>(m) ^ (attack ? 0x4a11ULL << 40 : 0);
  return RngStream(seed, id);
}

std::vector<std::string> pick_distinct(const std::vector<std::string>& pool, int count,
                                       RngStream& rng) {
  std::vector<int> idx(pool.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::vector<std::string> picked;
  picked.reserve(count);
  for (int j = 0; j < count; ++j) {
    size_t swap_with = j + rng.uniform_index(idx.size() - j);
    std::swap(idx[j], idx[swap_with]);
    picked.push_back(pool[idx[j]]);
  }
  return picked;
}

double cell_rate(const GroupProfile& profile, int hour, int dow, int m) {
  bool work = profile.work_days.count(dow) > 0 && profile.work_hours.count(hour) > 0;
  double base = work ? profile.work_rate : profile.off_rate;
  return base * profile.method_mult[m - 1];
}

void emit_cell(const std::vector<std::string>& pool, double rate, const std::string& user,
               int64_t bucket, int m, RngStream& rng, std::vector<ingest::RawEvent>* events,
               int* emitted_count) {
  *emitted_count = 0;
  if (rate <= 0.0) return;
  int count = static_cast<int>(rng.poisson(rate));
  if (count == 0) return;
  if (count > static_cast<int>(pool.size())) {
    logging::warn("synth: drawn count " + std::to_string(count) + " capped at pool size " +
                  std::to_string(pool.size()));
    count = static_cast<int>(pool.size());
  }
  auto targets = pick_distinct(pool, count, rng);
  for (const auto& target : targets) {
    ingest::RawEvent ev;
    ev.ts = bucket + static_cast<int64_t>(rng.uniform_index(3600));
    ev.user = user;
    ev.target = target;
    ev.method = m == 1 ? ingest::Method::kKerberos : ingest::Method::kNtlm;
    ev.outcome = ingest::Outcome::kSuccess;
    events->push_back(std::move(ev));
  }
  *emitted_count = count;
}

void sort_events(std::vector<ingest::RawEvent>* events) {
  std::sort(events->begin(), events->end(),
            [](const ingest::RawEvent& a, const ingest::RawEvent& b) {
              return std::tie(a.ts, a.user, a.target) < std::tie(b.ts, b.user, b.target);
            });
  std::stable_sort(events->begin(), events->end(),
                   [](const ingest::RawEvent& a, const ingest::RawEvent& b) {
                     int64_t ba = timeutil::hour_bucket(a.ts), bb = timeutil::hour_bucket(b.ts);
                     return std::tie(ba, a.user) < std::tie(bb, b.user);
                   });
}

std::vector<std::string> global_pool(const ScenarioConfig& config) {
  std::vector<std::string> pool;
  for (const auto& group : config.groups)
    pool.insert(pool.end(), group.targets.begin(), group.targets.end());
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  return pool;
}

}  // namespace

std::string user_name(int group, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "u%02d%03d", group, index);
  return buf;
}

ScenarioConfig default_scenario(uint64_t seed, bool with_attacks) {
  ScenarioConfig config;
  config.seed = seed;
  config.users_per_group = 60;
  config.duration_days = 27;
  static const double kerberos_mult[8] = {1.00, 1.10, 0.90, 1.05, 0.95, 1.15, 1.00, 0.90};
  static const double ntlm_mult[8] = {0.60, 0.50, 0.70, 0.55, 0.65, 0.50, 0.60, 0.45};
  for (int g = 0; g < 8; ++g) {
    GroupProfile profile;
    int shift = g % 3 - 1;  // staggered office hours
    for (int h = 9 + shift; h < 18 + shift; ++h) profile.work_hours.insert(h);
    if (g < 6)
      profile.work_days = {2, 3, 4, 5, 6};  // Mon-Fri
    else
      profile.work_days = {3, 4, 5, 6, 7};  // Tue-Sat
    profile.work_rate = 3.0;
    profile.off_rate = 0.25;
    profile.method_mult[0] = kerberos_mult[g];
    profile.method_mult[1] = ntlm_mult[g];
    for (int t = 0; t < 25; ++t) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "g%02d-srv%02d", g, t);
      profile.targets.push_back(buf);
    }
    config.groups.push_back(std::move(profile));
  }
  if (with_attacks) {
    // Six-hour spikes at 10:00 on a workday of the final week, inside every
    // group's office hours.
    RngStream rng(seed, 0xa77ac);
    for (int i = 0; i < 24; ++i) {
      int g = i % 8;
      AttackSpec attack;
      attack.user = user_name(g, 5 + 2 * (i / 8));
      int day = (g < 6 ? 21 : 22) + static_cast<int>(rng.uniform_index(5));  // workdays only
      attack.start_bucket = config.start_ts + day * 86400 + 10 * 3600;
      attack.duration_hours = 6;
      attack.multiplier = 10.0;
      config.attacks.push_back(std::move(attack));
    }
  }
  return config;
}

ScenarioConfig four_block_scenario(uint64_t seed) {
  ScenarioConfig config;
  config.seed = seed;
  config.users_per_group = 30;
  config.duration_days = 21;
  config.machine_fraction = 0.05;
  static const double rates[4] = {3.0, 4.0, 2.5, 3.5};
  for (int g = 0; g < 4; ++g) {
    GroupProfile profile;
    for (int h = 8 + g; h < 17 + g; ++h) profile.work_hours.insert(h);
    profile.work_days = {2, 3, 4, 5, 6};
    profile.work_rate = rates[g];
    profile.off_rate = 0.2;
    profile.method_mult[0] = 1.0;
    profile.method_mult[1] = 0.5;
    for (int t = 0; t < 12; ++t) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "b%02d-srv%02d", g, t);
      profile.targets.push_back(buf);
    }
    config.groups.push_back(std::move(profile));
  }
  return config;
}

Generated generate_scenario(const ScenarioConfig& config) {
  if (config.groups.empty()) throw InputError("generate_scenario: no groups configured");
  for (const auto& group : config.groups) {
    if (group.targets.empty()) throw InputError("generate_scenario: empty target pool");
    if (group.work_rate < 0 || group.off_rate < 0)
      throw InputError("generate_scenario: negative rate");
  }
  for (const auto& attack : config.attacks)
    if (attack.multiplier < 1.0)
      throw InputError("generate_scenario: attack multiplier must be > 1");

  Generated out;
  const int64_t end_ts = config.start_ts + static_cast<int64_t>(config.duration_days) * 86400;
  for (int g = 0; g < static_cast<int>(config.groups.size()); ++g) {
    const GroupProfile& profile = config.groups[g];
    for (int u = 0; u < config.users_per_group; ++u) {
      const std::string user = user_name(g, u);
      out.truth.groups[user] = g;
      for (int64_t bucket = config.start_ts; bucket < end_ts; bucket += 3600) {
        int hour = timeutil::hour_of_day(bucket);
        int dow = timeutil::day_of_week_sunday1(bucket);
        for (int m = 1; m <= 2; ++m) {
          double rate = cell_rate(profile, hour, dow, m);
          if (rate <= 0.0) continue;
          RngStream rng = cell_stream(config.seed, user, bucket, m, false);
          int emitted = 0;
          emit_cell(profile.targets, rate, user, bucket, m, rng, &out.events, &emitted);
        }
      }
    }
  }

  // HR table: planted groups with a scrambled fraction.
  {
    RngStream rng(config.seed, 0x44aa);
    for (const auto& [user, g] : out.truth.groups) {
      int division = g;
      if (rng.uniform() < config.hr_scramble)
        division = static_cast<int>(rng.uniform_index(config.groups.size()));
      out.hr[user] = "div" + std::to_string(division);
    }
  }

  // Machine-account and reserved-name noise; all of it must fall to the
  // ingest filters.
  {
    auto pool = global_pool(config);
    int total_users = static_cast<int>(config.groups.size()) * config.users_per_group;
    int n_machines = static_cast<int>(std::lround(config.machine_fraction * total_users));
    RngStream rng(config.seed, 0x3ac);
    for (int i = 0; i < n_machines; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "HOST%03d$", i);
      for (int64_t day = 0; day < config.duration_days; ++day) {
        for (int hour : {1, 7, 13, 19}) {
          int64_t bucket = config.start_ts + day * 86400 + hour * 3600;
          ingest::RawEvent ev;
          ev.ts = bucket + static_cast<int64_t>(rng.uniform_index(3600));
          ev.user = name;
          ev.target = pool[rng.uniform_index(pool.size())];
          ev.method = ingest::Method::kKerberos;
          ev.outcome = ingest::Outcome::kSuccess;
          out.events.push_back(std::move(ev));
        }
      }
    }
    static const char* reserved[] = {"ADMINISTRATOR", "SYSTEM", "LOCAL", "ANONYMOUS"};
    for (int64_t day = 0; day < config.duration_days; ++day) {
      int64_t base = config.start_ts + day * 86400;
      ingest::RawEvent ev;
      ev.ts = base + 11 * 3600 + static_cast<int64_t>(rng.uniform_index(3600));
      ev.user = reserved[day % 4];
      ev.target = pool[rng.uniform_index(pool.size())];
      ev.method = ingest::Method::kKerberos;
      ev.outcome = ingest::Outcome::kSuccess;
      out.events.push_back(ev);
      // failures and non-Kerberos/NTLM traffic from real users
      ev.user = user_name(static_cast<int>(day % config.groups.size()), 0);
      ev.outcome = ingest::Outcome::kFailure;
      out.events.push_back(ev);
      ev.outcome = ingest::Outcome::kSuccess;
      ev.method = ingest::Method::kOther;
      out.events.push_back(ev);
    }
  }

  for (const auto& attack : config.attacks) inject_recon(config, &out, attack);
  sort_events(&out.events);
  return out;
}

void inject_recon(const ScenarioConfig& config, Generated* generated, const AttackSpec& attack) {
  auto git = generated->truth.groups.find(attack.user);
  if (git == generated->truth.groups.end())
    throw InputError("inject_recon: unknown user " + attack.user);
  const int64_t end_ts = config.start_ts + static_cast<int64_t>(config.duration_days) * 86400;
  const int64_t attack_end = attack.start_bucket + static_cast<int64_t>(attack.duration_hours) * 3600;
  if (attack.start_bucket < config.start_ts || attack_end > end_ts)
    throw InputError("inject_recon: attack window outside stream span");
  if (attack.multiplier == 1.0) return;  // identity
  const GroupProfile& profile = config.groups[git->second];
  auto pool = global_pool(config);

  auto& events = generated->events;
  events.erase(std::remove_if(events.begin(), events.end(),
                              [&](const ingest::RawEvent& ev) {
                                return ev.user == attack.user && ev.ts >= attack.start_bucket &&
                                       ev.ts < attack_end;
                              }),
               events.end());
  for (int64_t bucket = attack.start_bucket; bucket < attack_end; bucket += 3600) {
    int hour = timeutil::hour_of_day(bucket);
    int dow = timeutil::day_of_week_sunday1(bucket);
    for (int m = 1; m <= 2; ++m) {
      double rate = cell_rate(profile, hour, dow, m) * attack.multiplier;
      RngStream rng = cell_stream(config.seed, attack.user, bucket, m, true);
      int emitted = 0;
      emit_cell(pool, rate, attack.user, bucket, m, rng, &events, &emitted);
      if (emitted > 0) generated->truth.attacks.insert({attack.user, bucket, m});
    }
  }
}

void write_events_jsonl(std::ostream& out, const std::vector<ingest::RawEvent>& events) {
  for (const auto& ev : events) {
    json j;
    j["ts"] = timeutil::format_iso8601_utc(ev.ts);
    j["user"] = ev.user;
    j["target"] = ev.target;
    j["method"] = ingest::method_name(ev.method);
    j["outcome"] = ev.outcome == ingest::Outcome::kSuccess ? "success" : "failure";
    out << j.dump() << '\n';
  }
}

void write_truth_json(std::ostream& out, const GroundTruth& truth) {
  json j;
  j["groups"] = json::object();
  for (const auto& [user, g] : truth.groups) j["groups"][user] = g;
  j["attacks"] = json::array();
  for (const auto& [user, bucket, m] : truth.attacks) {
    json a;
    a["user"] = user;
    a["bucket"] = timeutil::format_iso8601_utc(bucket);
    a["method"] = m == 1 ? "kerberos" : "ntlm";
    j["attacks"].push_back(std::move(a));
  }
  out << j.dump(2) << '\n';
}

GroundTruth read_truth_json(std::istream& in) {
  json j = json::parse(in);
  GroundTruth truth;
  for (const auto& [user, g] : j.at("groups").items()) truth.groups[user] = g.get<int>();
  for (const auto& a : j.at("attacks")) {
    auto bucket = timeutil::parse_iso8601_utc(a.at("bucket").get<std::string>());
    if (!bucket) throw InputError("truth json: bad bucket timestamp");
    int m = a.at("method").get<std::string>() == "kerberos" ? 1 : 2;
    truth.attacks.insert({a.at("user").get<std::string>(), *bucket, m});
  }
  return truth;
}

void write_hr_csv(std::ostream& out, const std::map<std::string, std::string>& hr) {
  out << "user,division\n";
  for (const auto& [user, division] : hr) out << user << ',' << division << '\n';
}

std::map<std::string, std::string> read_hr_csv(std::istream& in) {
  if (!in) throw InputError("read_hr_csv: unreadable stream");
  std::map<std::string, std::string> hr;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    if (header) {
      header = false;
      continue;
    }
    auto comma = line.find(',');
    if (comma == std::string::npos) throw InputError("hr csv: bad line: " + line);
    std::string division = line.substr(comma + 1);
    if (!division.empty() && division.back() == '\r') division.pop_back();
    hr[line.substr(0, comma)] = division;
  }
  return hr;
}

namespace {

json profile_to_json(const GroupProfile& profile) {
  json j;
  j["targets"] = profile.targets;
  j["work_hours"] = profile.work_hours;
  j["work_days"] = profile.work_days;
  j["work_rate"] = profile.work_rate;
  j["off_rate"] = profile.off_rate;
  j["method_mult"] = {profile.method_mult[0], profile.method_mult[1]};
  return j;
}

GroupProfile profile_from_json(const json& j) {
  GroupProfile profile;
  profile.targets = j.at("targets").get<std::vector<std::string>>();
  for (int h : j.at("work_hours")) profile.work_hours.insert(h);
  for (int d : j.at("work_days")) profile.work_days.insert(d);
  profile.work_rate = j.at("work_rate").get<double>();
  profile.off_rate = j.at("off_rate").get<double>();
  auto mult = j.at("method_mult");
  profile.method_mult[0] = mult.at(0).get<double>();
  profile.method_mult[1] = mult.at(1).get<double>();
  return profile;
}

}  // namespace

void write_scenario_json(std::ostream& out, const ScenarioConfig& config) {
  json j;
  j["users_per_group"] = config.users_per_group;
  j["machine_fraction"] = config.machine_fraction;
  j["duration_days"] = config.duration_days;
  j["start_ts"] = timeutil::format_iso8601_utc(config.start_ts);
  j["hr_scramble"] = config.hr_scramble;
  j["seed"] = config.seed;
  j["groups"] = json::array();
  for (const auto& group : config.groups) j["groups"].push_back(profile_to_json(group));
  j["attacks"] = json::array();
  for (const auto& attack : config.attacks) {
    json a;
    a["user"] = attack.user;
    a["start_bucket"] = timeutil::format_iso8601_utc(attack.start_bucket);
    a["duration_hours"] = attack.duration_hours;
    a["multiplier"] = attack.multiplier;
    j["attacks"].push_back(std::move(a));
  }
  out << j.dump(2) << '\n';
}

ScenarioConfig scenario_from_json(std::istream& in) {
  json j = json::parse(in);
  ScenarioConfig config;
  config.users_per_group = j.at("users_per_group").get<int>();
  config.machine_fraction = j.value("machine_fraction", 0.0);
  config.duration_days = j.at("duration_days").get<int>();
  auto start = timeutil::parse_iso8601_utc(j.at("start_ts").get<std::string>());
  if (!start) throw InputError("scenario json: bad start_ts");
  config.start_ts = *start;
  config.hr_scramble = j.value("hr_scramble", 0.0);
  config.seed = j.value("seed", 7ULL);
  for (const auto& g : j.at("groups")) config.groups.push_back(profile_from_json(g));
  for (const auto& a : j.value("attacks", json::array())) {
    AttackSpec attack;
    attack.user = a.at("user").get<std::string>();
    auto bucket = timeutil::parse_iso8601_utc(a.at("start_bucket").get<std::string>());
    if (!bucket) throw InputError("scenario json: bad attack start_bucket");
    attack.start_bucket = *bucket;
    attack.duration_hours = a.at("duration_hours").get<int>();
    attack.multiplier = a.at("multiplier").get<double>();
    config.attacks.push_back(std::move(attack));
  }
  return config;
}

}  // namespace authpeer::synth
