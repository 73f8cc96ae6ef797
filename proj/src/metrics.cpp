#include "trialnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "trialnet/random.hpp"

namespace trialnet {

namespace {

void count_classes(const ScoredSet& s, std::size_t& pos, std::size_t& neg) {
  pos = neg = 0;
  for (const auto& p : s) {
    if (p.label != 0 && p.label != 1)
      throw std::invalid_argument("labels must be 0 or 1");
    (p.label == 1 ? pos : neg) += 1;
  }
}

bool single_class(const ScoredSet& s) {
  std::size_t pos, neg;
  count_classes(s, pos, neg);
  return pos == 0 || neg == 0;
}

}  // namespace

double roc_auc(const ScoredSet& s) {
  if (s.empty()) throw std::invalid_argument("roc_auc: empty scored set");
  std::size_t pos, neg;
  count_classes(s, pos, neg);
  if (pos == 0 || neg == 0)
    throw std::invalid_argument("roc_auc: both classes must be present");

  // Sort-based midrank computation. All terms are multiples of 0.5 well
  // below 2^53, so the result is exactly the pair-counting value.
  std::vector<std::size_t> order(s.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return s[a].score < s[b].score;
  });
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && s[order[j]].score == s[order[i]].score) ++j;
    // Midrank of the tied block [i, j) with 1-based ranks.
    const double midrank = 0.5 * (static_cast<double>(i + 1) +
                                  static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (s[order[k]].label == 1) pos_rank_sum += midrank;
    i = j;
  }
  const double u = pos_rank_sum -
                   static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double pr_auc(const ScoredSet& s) {
  if (s.empty()) throw std::invalid_argument("pr_auc: empty scored set");
  std::size_t pos, neg;
  count_classes(s, pos, neg);
  if (pos == 0)
    throw std::invalid_argument("pr_auc: at least one positive required");

  std::vector<std::size_t> order(s.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return s[a].score > s[b].score;
  });

  double area = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && s[order[j]].score == s[order[i]].score) ++j;
    for (std::size_t k = i; k < j; ++k) {
      if (s[order[k]].label == 1)
        ++tp;
      else
        ++fp;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(pos);
    const double precision =
        static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

double f1_at_half(const ScoredSet& s) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& p : s) {
    if (p.label != 0 && p.label != 1)
      throw std::invalid_argument("labels must be 0 or 1");
    const bool pred = p.score >= 0.5;
    if (pred && p.label == 1) ++tp;
    if (pred && p.label == 0) ++fp;
    if (!pred && p.label == 1) ++fn;
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

namespace {

ScoredSet resample(const ScoredSet& s, Rng& rng,
                   std::vector<std::size_t>* indices_out = nullptr) {
  ScoredSet out;
  out.reserve(s.size());
  if (indices_out) indices_out->clear();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::size_t idx = rng.below(s.size());
    out.push_back(s[idx]);
    if (indices_out) indices_out->push_back(idx);
  }
  return out;
}

}  // namespace

BootstrapStats bootstrap_stats(const ScoredSet& s, const MetricFn& metric,
                               std::size_t B, std::uint64_t seed) {
  if (B < 2) throw std::invalid_argument("bootstrap needs B >= 2");
  if (s.empty()) throw std::invalid_argument("bootstrap: empty scored set");
  const bool degenerate = single_class(s);  // cannot be fixed by redrawing

  Rng rng = derived_rng(seed, "bootstrap");
  BootstrapStats stats;
  std::vector<double> values;
  values.reserve(B);
  const std::size_t max_attempts = 1000 * B;
  std::size_t attempts = 0;
  while (values.size() < B) {
    if (++attempts > max_attempts)
      throw std::runtime_error("bootstrap: too many single-class redraws");
    ScoredSet r = resample(s, rng);
    if (!degenerate && single_class(r)) {
      ++stats.redraws;
      continue;
    }
    values.push_back(metric(r));
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(B);
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(B - 1);
  stats.mean = mean;
  stats.stddev = std::sqrt(var);
  return stats;
}

double paired_bootstrap_pvalue(const ScoredSet& a, const ScoredSet& b,
                               const MetricFn& metric, std::size_t B,
                               std::uint64_t seed) {
  if (B < 1) throw std::invalid_argument("paired bootstrap needs B >= 1");
  if (a.size() != b.size())
    throw std::invalid_argument("paired bootstrap: sets differ in size");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].label != b[i].label)
      throw std::invalid_argument(
          "paired bootstrap: label misalignment at index " +
          std::to_string(i));
  if (a.empty()) throw std::invalid_argument("paired bootstrap: empty sets");
  const bool degenerate = single_class(a);

  Rng rng = derived_rng(seed, "paired-bootstrap");
  std::size_t count = 0;
  std::size_t done = 0;
  const std::size_t max_attempts = 1000 * B;
  std::size_t attempts = 0;
  while (done < B) {
    if (++attempts > max_attempts)
      throw std::runtime_error("bootstrap: too many single-class redraws");
    ScoredSet ra(a.size()), rb(b.size());
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::size_t idx = rng.below(a.size());
      ra[i] = a[idx];
      rb[i] = b[idx];
      (ra[i].label == 1 ? pos : neg) = true;
    }
    if (!degenerate && (!pos || !neg)) continue;
    if (metric(ra) <= metric(rb)) ++count;
    ++done;
  }
  return static_cast<double>(count) / static_cast<double>(B);
}

}  // namespace trialnet
