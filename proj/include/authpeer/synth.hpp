#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "authpeer/evaluate.hpp"
#include "authpeer/ingest.hpp"

namespace authpeer::synth {

struct AttackSpec {
  std::string user;
  int64_t start_bucket = 0;
  int duration_hours = 1;
  double multiplier = 10.0;  // > 1
};

struct GroupProfile {
  std::vector<std::string> targets;
  std::set<int> work_hours;  // 0..23
  std::set<int> work_days;   // 1 = Sunday .. 7
  double work_rate = 3.0;    // expected distinct targets per hour
  double off_rate = 0.25;
  double method_mult[2] = {1.0, 0.6};  // Kerberos, NTLM
};

struct ScenarioConfig {
  std::vector<GroupProfile> groups;
  int users_per_group = 60;
  double machine_fraction = 0.08;
  int duration_days = 27;
  int64_t start_ts = 1704067200;  // 2024-01-01T00:00:00Z, a Monday
  std::vector<AttackSpec> attacks;
  double hr_scramble = 0.1;
  uint64_t seed = 7;
};

struct GroundTruth {
  std::map<std::string, int> groups;
  std::set<evaluate::AttackKey> attacks;  // (user, bucket, method 1|2)
};

struct Generated {
  std::vector<ingest::RawEvent> events;
  GroundTruth truth;
  std::map<std::string, std::string> hr;  // imperfect HR table
};

// The desk-scale default: 8 groups x 60 users over 27 days with staggered
// schedules, per-group method effects, machine-account noise and (optionally)
// 24 six-hour reconnaissance spikes at multiplier 10 in the final week.
ScenarioConfig default_scenario(uint64_t seed, bool with_attacks);

// Four groups with disjoint target pools; adjacency is block-diagonal.
ScenarioConfig four_block_scenario(uint64_t seed);

std::string user_name(int group, int index);

// Baseline generation plus configured attacks, deterministically seeded.
// Events come back sorted by (hour bucket, user, ts, method, target).
Generated generate_scenario(const ScenarioConfig& config);

// Replaces the user's draws during the attack window with multiplied-rate
// draws from the global target pool. Multiplier 1 is the identity.
void inject_recon(const ScenarioConfig& config, Generated* generated, const AttackSpec& attack);

void write_events_jsonl(std::ostream& out, const std::vector<ingest::RawEvent>& events);
void write_truth_json(std::ostream& out, const GroundTruth& truth);
GroundTruth read_truth_json(std::istream& in);
void write_hr_csv(std::ostream& out, const std::map<std::string, std::string>& hr);
std::map<std::string, std::string> read_hr_csv(std::istream& in);

ScenarioConfig scenario_from_json(std::istream& in);
void write_scenario_json(std::ostream& out, const ScenarioConfig& config);

}  // namespace authpeer::synth
