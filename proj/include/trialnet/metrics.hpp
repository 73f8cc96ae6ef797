#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace trialnet {

struct ScoredPair {
  double score = 0.0;  // in [0,1]
  int label = 0;       // 0 or 1
};

using ScoredSet = std::vector<ScoredPair>;

/// Mann-Whitney statistic: P(score+ > score-) + P(tie)/2, computed with
/// exact pair counts. Both classes must be present.
double roc_auc(const ScoredSet& s);

/// Area under precision-recall with equal scores grouped into one threshold
/// step and step-wise (right-continuous) interpolation:
/// sum over descending distinct thresholds of precision * delta-recall.
/// Requires at least one positive.
double pr_auc(const ScoredSet& s);

/// Harmonic mean of precision and recall with predictions binarized at
/// score >= 0.5; returns 0 when precision + recall is 0.
double f1_at_half(const ScoredSet& s);

using MetricFn = std::function<double(const ScoredSet&)>;

struct BootstrapStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation over resamples
  std::size_t redraws = 0;  // single-class resamples that were redrawn
};

/// B resamples with replacement; single-class resamples are redrawn and
/// counted. Deterministic given the seed.
BootstrapStats bootstrap_stats(const ScoredSet& s, const MetricFn& metric,
                               std::size_t B, std::uint64_t seed);

/// One-sided paired bootstrap: the fraction of shared resamples where
/// metric(a) <= metric(b). Ties count toward the fraction, so comparing a
/// scored set against itself gives p = 1. Requires aligned sets (same size,
/// same labels per index).
double paired_bootstrap_pvalue(const ScoredSet& a, const ScoredSet& b,
                               const MetricFn& metric, std::size_t B,
                               std::uint64_t seed);

}  // namespace trialnet
