#include "authpeer/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "authpeer/errors.hpp"
#include "authpeer/log.hpp"
#include "authpeer/timeutil.hpp"

namespace authpeer::ingest {

namespace {

std::string to_upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

Method parse_method(const std::string& raw) {
  std::string m = to_lower(raw);
  if (m == "kerberos") return Method::kKerberos;
  if (m == "ntlm") return Method::kNtlm;
  return Method::kOther;
}

bool parse_outcome(const std::string& raw, Outcome* out) {
  std::string o = to_lower(raw);
  if (o == "success") {
    *out = Outcome::kSuccess;
    return true;
  }
  if (o == "failure") {
    *out = Outcome::kFailure;
    return true;
  }
  return false;
}

bool parse_jsonl_line(const std::string& line, RawEvent* ev) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return false;
  if (!j.contains("ts") || !j.contains("user") || !j.contains("target") ||
      !j.contains("method") || !j.contains("outcome"))
    return false;
  if (!j["ts"].is_string() || !j["user"].is_string() || !j["target"].is_string() ||
      !j["method"].is_string() || !j["outcome"].is_string())
    return false;
  auto ts = timeutil::parse_iso8601_utc(j["ts"].get<std::string>());
  if (!ts) return false;
  ev->ts = *ts;
  ev->user = j["user"].get<std::string>();
  ev->target = j["target"].get<std::string>();
  if (ev->user.empty() || ev->target.empty()) return false;
  ev->method = parse_method(j["method"].get<std::string>());
  return parse_outcome(j["outcome"].get<std::string>(), &ev->outcome);
}

std::vector<std::string> split_csv_line(const std::string& line) {
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
  return fields;
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::kKerberos: return "kerberos";
    case Method::kNtlm: return "ntlm";
    case Method::kOther: return "other";
  }
  return "other";
}

ParseResult parse_events(std::istream& in, Format format, bool strict) {
  if (!in) throw InputError("parse_events: unreadable stream");
  ParseResult result;
  std::string line;
  size_t lineno = 0;
  std::vector<int> column_of;  // csv column order from header
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    if (format == Format::kCsv && !header_seen) {
      header_seen = true;
      auto cols = split_csv_line(line);
      static const char* names[] = {"ts", "user", "target", "method", "outcome"};
      column_of.assign(5, -1);
      for (size_t i = 0; i < cols.size(); ++i)
        for (int f = 0; f < 5; ++f)
          if (to_lower(cols[i]) == names[f]) column_of[f] = static_cast<int>(i);
      for (int f = 0; f < 5; ++f)
        if (column_of[f] < 0) throw InputError("parse_events: csv header missing required columns");
      continue;
    }
    RawEvent ev;
    bool ok = false;
    if (format == Format::kJsonl) {
      ok = parse_jsonl_line(line, &ev);
    } else {
      auto fields = split_csv_line(line);
      auto get = [&](int f) -> const std::string& {
        static const std::string empty;
        int idx = column_of[f];
        return idx >= 0 && idx < static_cast<int>(fields.size()) ? fields[idx] : empty;
      };
      auto ts = timeutil::parse_iso8601_utc(get(0));
      ev.user = get(1);
      ev.target = get(2);
      if (ts && !ev.user.empty() && !ev.target.empty()) {
        ev.ts = *ts;
        ev.method = parse_method(get(3));
        ok = parse_outcome(get(4), &ev.outcome);
      }
    }
    if (!ok) {
      if (strict)
        throw InputError("parse_events: malformed line " + std::to_string(lineno));
      ++result.malformed;
      continue;
    }
    result.events.push_back(std::move(ev));
  }
  if (result.malformed > 0)
    logging::warn("parse_events: skipped " + std::to_string(result.malformed) + " malformed lines");
  return result;
}

std::vector<RawEvent> filter_events(const std::vector<RawEvent>& events) {
  static const std::set<std::string> reserved = {"LOCAL", "SYSTEM", "ANONYMOUS", "ADMINISTRATOR"};
  std::vector<RawEvent> kept;
  kept.reserve(events.size());
  for (const auto& ev : events) {
    if (ev.outcome != Outcome::kSuccess) continue;
    if (ev.method != Method::kKerberos && ev.method != Method::kNtlm) continue;
    if (!ev.user.empty() && ev.user.back() == '$') continue;
    if (reserved.count(to_upper(ev.user)) > 0) continue;
    kept.push_back(ev);
  }
  return kept;
}

std::vector<HourlyCount> aggregate_hourly(const std::vector<RawEvent>& events) {
  // (user, bucket, method) -> distinct targets
  std::map<std::tuple<std::string, int64_t, int>, std::set<std::string>> cells;
  for (const auto& ev : events) {
    cells[{ev.user, timeutil::hour_bucket(ev.ts), static_cast<int>(ev.method)}].insert(ev.target);
  }
  std::vector<HourlyCount> rows;
  rows.reserve(cells.size());
  for (const auto& [key, targets] : cells) {
    HourlyCount row;
    row.user = std::get<0>(key);
    row.bucket = std::get<1>(key);
    row.hour = timeutil::hour_of_day(row.bucket);
    row.dow = timeutil::day_of_week_sunday1(row.bucket);
    row.method = static_cast<Method>(std::get<2>(key));
    row.count = static_cast<int>(targets.size());
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const HourlyCount& a, const HourlyCount& b) {
    return std::tie(a.bucket, a.user, a.method) < std::tie(b.bucket, b.user, b.method);
  });
  return rows;
}

Dataset split_and_prune(const std::vector<HourlyCount>& counts, int train_days, int test_days,
                        int min_train_obs) {
  if (counts.empty()) throw InputError("split_and_prune: no counts");
  if (min_train_obs < 1) throw InputError("split_and_prune: min_train_obs must be >= 1");
  int64_t min_bucket = counts.front().bucket, max_bucket = counts.front().bucket;
  for (const auto& row : counts) {
    min_bucket = std::min(min_bucket, row.bucket);
    max_bucket = std::max(max_bucket, row.bucket);
  }
  const int64_t base_day = timeutil::day_start(min_bucket);
  const int64_t span_days = (timeutil::day_start(max_bucket) - base_day) / 86400 + 1;
  if (span_days < train_days + test_days)
    throw InputError("split_and_prune: data spans " + std::to_string(span_days) +
                     " days, need " + std::to_string(train_days + test_days));

  Dataset ds;
  std::map<std::string, int> train_rows;
  for (const auto& row : counts) {
    int64_t day = (timeutil::day_start(row.bucket) - base_day) / 86400;
    if (day < train_days) {
      ds.train.push_back(row);
      ++train_rows[row.user];
    } else if (day < train_days + test_days) {
      ds.test.push_back(row);
    }
  }
  for (const auto& [user, n] : train_rows)
    if (n >= min_train_obs) ds.users.insert(user);

  auto pruned = [&](const HourlyCount& row) { return ds.users.count(row.user) == 0; };
  ds.train.erase(std::remove_if(ds.train.begin(), ds.train.end(), pruned), ds.train.end());
  ds.test.erase(std::remove_if(ds.test.begin(), ds.test.end(), pruned), ds.test.end());
  return ds;
}

double dispersion_ratio(const std::vector<int>& counts) {
  if (counts.size() < 2) throw InputError("dispersion_ratio: need at least 2 values");
  double n = static_cast<double>(counts.size());
  double mean = 0.0;
  for (int c : counts) mean += c;
  mean /= n;
  double ss = 0.0;
  for (int c : counts) ss += (c - mean) * (c - mean);
  double var = ss / (n - 1.0);
  return var / mean;
}

void write_counts_csv(std::ostream& out, const std::vector<HourlyCount>& counts) {
  out << "user,bucket,hour,dow,method,count\n";
  for (const auto& row : counts) {
    out << row.user << ',' << timeutil::format_iso8601_utc(row.bucket) << ',' << row.hour << ','
        << row.dow << ',' << method_name(row.method) << ',' << row.count << '\n';
  }
}

std::vector<HourlyCount> read_counts_csv(std::istream& in) {
  if (!in) throw InputError("read_counts_csv: unreadable stream");
  std::vector<HourlyCount> rows;
  std::string line;
  bool header = true;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    if (header) {
      header = false;
      continue;
    }
    auto fields = split_csv_line(line);
    if (fields.size() != 6) throw InputError("counts csv: bad line " + std::to_string(lineno));
    HourlyCount row;
    row.user = fields[0];
    auto ts = timeutil::parse_iso8601_utc(fields[1]);
    if (!ts) throw InputError("counts csv: bad bucket at line " + std::to_string(lineno));
    row.bucket = *ts;
    row.hour = std::stoi(fields[2]);
    row.dow = std::stoi(fields[3]);
    row.method = parse_method(fields[4]);
    row.count = std::stoi(fields[5]);
    if (row.count < 1 || row.method == Method::kOther)
      throw InputError("counts csv: invalid row at line " + std::to_string(lineno));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace authpeer::ingest
