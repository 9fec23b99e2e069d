#pragma once

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tbcmp/detail/text.hpp"
#include "tbcmp/errors.hpp"
#include "tbcmp/stats.hpp"

// Application-level result parsing (HTTP benchmark output, one-way-delay
// samples) and per-request normalization of totals.

namespace tbcmp {

struct MissingField : ParseError {
  using ParseError::ParseError;
};
struct DegenerateRun : Error {
  using Error::Error;
};
struct ZeroRequests : Error {
  using Error::Error;
};

struct AbResult {
  std::uint64_t completed_requests = 0;
  double duration_s = 0.0;
  double requests_per_sec = 0.0;
  std::uint64_t total_transferred_bytes = 0;
  std::uint32_t concurrency = 0;
  std::string payload_label;   // assigned from the campaign manifest, not parsed
  bool cross_check_ok = true;  // requests_per_sec vs completed/duration within 1%
};

namespace detail_ab {

inline bool value_after(std::string_view line, std::string_view prefix, std::string_view& out) {
  if (!line.starts_with(prefix)) return false;
  std::string_view rest = line.substr(prefix.size());
  out = detail::next_token(rest);
  return true;
}

}  // namespace detail_ab

// Extracts the benchmark summary fields from ab's plain-text report. The
// four lines named below must be present; everything else is ignored.
inline AbResult parse_ab_output(std::string_view text) {
  AbResult r;
  bool have_requests = false, have_duration = false, have_rate = false, have_bytes = false;
  detail::for_each_line(text, [&](std::uint64_t, std::string_view line) {
    std::string_view tok;
    if (detail_ab::value_after(line, "Complete requests:", tok)) {
      have_requests = detail::parse_int(tok, r.completed_requests);
    } else if (detail_ab::value_after(line, "Time taken for tests:", tok)) {
      have_duration = detail::parse_double(tok, r.duration_s);
    } else if (detail_ab::value_after(line, "Requests per second:", tok)) {
      have_rate = detail::parse_double(tok, r.requests_per_sec);
    } else if (detail_ab::value_after(line, "Total transferred:", tok)) {
      have_bytes = detail::parse_int(tok, r.total_transferred_bytes);
    } else if (detail_ab::value_after(line, "Concurrency Level:", tok)) {
      detail::parse_int(tok, r.concurrency);
    }
  });
  if (!have_requests) throw MissingField("ab output: missing 'Complete requests:'");
  if (!have_duration) throw MissingField("ab output: missing 'Time taken for tests:'");
  if (!have_rate) throw MissingField("ab output: missing 'Requests per second:'");
  if (!have_bytes) throw MissingField("ab output: missing 'Total transferred:'");
  if (r.completed_requests == 0) throw DegenerateRun("ab output: zero completed requests");
  if (r.duration_s <= 0.0) throw DegenerateRun("ab output: non-positive test duration");
  double implied = static_cast<double>(r.completed_requests) / r.duration_s;
  r.cross_check_ok = std::fabs(r.requests_per_sec - implied) <= 0.01 * implied;
  return r;
}

// Canonical emitter for the summary lines parse_ab_output consumes.
// Doubles use shortest round-trip form so emit + parse preserves fields.
inline std::string format_ab_output(const AbResult& r) {
  std::ostringstream os;
  os << "Concurrency Level:      " << r.concurrency << "\n";
  os << "Time taken for tests:   " << detail::format_double(r.duration_s) << " seconds\n";
  os << "Complete requests:      " << r.completed_requests << "\n";
  os << "Total transferred:      " << r.total_transferred_bytes << " bytes\n";
  os << "Requests per second:    " << detail::format_double(r.requests_per_sec)
     << " [#/sec] (mean)\n";
  return os.str();
}

struct DelaySample {
  std::int64_t send_ts_ns = 0;
  double one_way_delay_ms = 0.0;  // may be negative: sender clocks are unsynchronized

  bool operator==(const DelaySample&) const = default;
};

inline constexpr std::string_view kDelayCsvHeader = "send_ts_ns,delay_ms";

inline std::vector<DelaySample> parse_delay_csv(std::string_view text) {
  std::vector<DelaySample> out;
  detail::for_each_line(text, [&](std::uint64_t line_no, std::string_view line) {
    auto t = detail::trim(line);
    if (t.empty() || t.front() == '#' || t == kDelayCsvHeader) return;
    auto fields = detail::split(t, ',');
    DelaySample s;
    if (fields.size() != 2 || !detail::parse_int(detail::trim(fields[0]), s.send_ts_ns) ||
        !detail::parse_double(detail::trim(fields[1]), s.one_way_delay_ms))
      throw ParseError("delay csv: bad line " + std::to_string(line_no) + ": '" + std::string(line) +
                       "'");
    out.push_back(s);
  });
  return out;
}

inline std::string format_delay_csv(const std::vector<DelaySample>& samples) {
  std::ostringstream os;
  os << kDelayCsvHeader << "\n";
  for (const auto& s : samples)
    os << s.send_ts_ns << ',' << detail::format_double(s.one_way_delay_ms) << "\n";
  return os.str();
}

namespace detail_pct {

// Percentile by linear interpolation of the empirical CDF at positions
// k/n: h = q*n in 1-based positions, interpolating between floor(h) and
// floor(h)+1 and clamping at the extremes.
inline double percentile_sorted(const std::vector<double>& sorted, double q) {
  const auto n = static_cast<double>(sorted.size());
  double h = q * n;
  if (h <= 1.0) return sorted.front();
  if (h >= n) return sorted.back();
  auto k = static_cast<std::size_t>(h);  // floor; h >= 1 here
  double g = h - static_cast<double>(k);
  return sorted[k - 1] + g * (sorted[k] - sorted[k - 1]);
}

}  // namespace detail_pct

// Jitter of a delay series: p95 - p50 of the one-way delays. Differencing
// two percentiles cancels any constant clock offset, which is what makes
// the number usable with unsynchronized clocks.
inline double jitter(const std::vector<DelaySample>& samples) {
  if (samples.size() < 2)
    throw TooFewSamples("jitter: need >= 2 delay samples, have " +
                        std::to_string(samples.size()));
  std::vector<double> delays;
  delays.reserve(samples.size());
  for (const auto& s : samples) delays.push_back(s.one_way_delay_ms);
  std::sort(delays.begin(), delays.end());
  return detail_pct::percentile_sorted(delays, 0.95) - detail_pct::percentile_sorted(delays, 0.50);
}

enum class MetricLevel { Application, Os, Network };

inline std::string_view metric_level_name(MetricLevel level) {
  switch (level) {
    case MetricLevel::Application:
      return "application";
    case MetricLevel::Os:
      return "os";
    case MetricLevel::Network:
      return "network";
  }
  return "unknown";
}

struct NormalizedMetric {
  std::string name;
  double value_per_request = 0.0;
  MetricLevel source_level = MetricLevel::Application;
};

// total / completed_requests; testbeds completing different amounts of
// work become directly comparable this way.
inline NormalizedMetric normalize_per_request(double total, const AbResult& ab, std::string name,
                                              MetricLevel level) {
  if (ab.completed_requests == 0)
    throw ZeroRequests("normalize_per_request(" + name + "): zero completed requests");
  return NormalizedMetric{std::move(name),
                          total / static_cast<double>(ab.completed_requests), level};
}

}  // namespace tbcmp
