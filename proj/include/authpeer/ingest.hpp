#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

namespace authpeer::ingest {

enum class Method { kKerberos, kNtlm, kOther };
enum class Outcome { kSuccess, kFailure };

const char* method_name(Method m);  // "kerberos" | "ntlm" | "other"

struct RawEvent {
  int64_t ts = 0;  // epoch seconds, UTC
  std::string user;
  std::string target;
  Method method = Method::kOther;
  Outcome outcome = Outcome::kFailure;
};

// One hourly distinct-target count. Zero-count rows are never materialized.
struct HourlyCount {
  std::string user;
  int64_t bucket = 0;  // hour start, epoch seconds
  int hour = 0;        // 0..23
  int dow = 0;         // 1 = Sunday .. 7 = Saturday
  Method method = Method::kKerberos;
  int count = 0;       // >= 1
};

struct Dataset {
  std::vector<HourlyCount> train;
  std::vector<HourlyCount> test;
  std::set<std::string> users;
};

enum class Format { kJsonl, kCsv };

struct ParseResult {
  std::vector<RawEvent> events;
  size_t malformed = 0;
};

// Reads line-delimited events. Malformed lines are skipped and counted;
// in strict mode the first malformed line is fatal.
ParseResult parse_events(std::istream& in, Format format, bool strict = false);

// Keeps successful Kerberos/NTLM events from human accounts: no "$" suffix,
// name not one of LOCAL/SYSTEM/ANONYMOUS/ADMINISTRATOR (case-insensitive).
std::vector<RawEvent> filter_events(const std::vector<RawEvent>& events);

// Distinct targets per (user, hour bucket, method). Input must be filtered.
std::vector<HourlyCount> aggregate_hourly(const std::vector<RawEvent>& events);

// Calendar split at midnight UTC: first train_days days go to train, the next
// test_days to test. Users with fewer than min_train_obs train rows, or seen
// only in test, are removed from both splits.
Dataset split_and_prune(const std::vector<HourlyCount>& counts, int train_days, int test_days,
                        int min_train_obs);

// Sample variance (n-1 denominator) over sample mean.
double dispersion_ratio(const std::vector<int>& counts);

// counts CSV, header: user,bucket,hour,dow,method,count
void write_counts_csv(std::ostream& out, const std::vector<HourlyCount>& counts);
std::vector<HourlyCount> read_counts_csv(std::istream& in);

}  // namespace authpeer::ingest
