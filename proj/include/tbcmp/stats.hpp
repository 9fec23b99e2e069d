#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tbcmp/errors.hpp"

// Confidence intervals over repeated runs and the similar/different
// verdict between a baseline and a candidate measurement.

namespace tbcmp {

struct TooFewSamples : Error {
  using Error::Error;
};
struct ZeroBaselineMean : Error {
  using Error::Error;
};

// 97.5th percentile of the standard normal; sample means are treated as
// normally distributed regardless of n.
inline constexpr double kZ95 = 1.959964;

struct SampleSet {
  std::string metric_name;
  std::vector<double> values;  // one per run

  std::size_t n() const { return values.size(); }
};

struct ConfidenceInterval {
  double mean = 0.0;
  double half_width = 0.0;
  double level = 0.95;

  double lower() const { return mean - half_width; }
  double upper() const { return mean + half_width; }
};

// mean +/- z * s / sqrt(n) with the sample (n-1) standard deviation.
inline ConfidenceInterval confidence_interval(const SampleSet& s) {
  const std::size_t n = s.n();
  if (n < 2)
    throw TooFewSamples("confidence_interval(" + s.metric_name + "): need >= 2 samples, have " +
                        std::to_string(n));
  double sum = 0.0;
  for (double v : s.values) sum += v;
  double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : s.values) ss += (v - mean) * (v - mean);
  double stddev = std::sqrt(ss / static_cast<double>(n - 1));
  return ConfidenceInterval{mean, kZ95 * stddev / std::sqrt(static_cast<double>(n))};
}

struct Verdict {
  double relative_diff = 0.0;  // |mean_c - mean_b| / |mean_b|
  bool similar = false;        // relative_diff <= threshold
  bool ci_overlap = false;     // stronger criterion: the 95% intervals intersect
  double threshold = 0.10;
};

inline Verdict similarity_from_cis(const ConfidenceInterval& baseline,
                                   const ConfidenceInterval& candidate, double threshold = 0.10) {
  if (baseline.mean == 0.0) throw ZeroBaselineMean("similarity: baseline mean is zero");
  Verdict v;
  v.threshold = threshold;
  v.relative_diff = std::fabs(candidate.mean - baseline.mean) / std::fabs(baseline.mean);
  v.similar = v.relative_diff <= threshold;
  v.ci_overlap =
      std::fabs(candidate.mean - baseline.mean) <= baseline.half_width + candidate.half_width;
  return v;
}

inline Verdict similarity(const SampleSet& baseline, const SampleSet& candidate,
                          double threshold = 0.10) {
  return similarity_from_cis(confidence_interval(baseline), confidence_interval(candidate),
                             threshold);
}

}  // namespace tbcmp
