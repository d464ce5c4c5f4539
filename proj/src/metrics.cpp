#include "pel/metrics.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <numeric>

#include "pel/errors.hpp"

namespace pel {
namespace {

void check_sizes(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw MetricError(fmt::format("{} scores vs {} labels", scores.size(), labels.size()));
  }
  for (int l : labels) {
    if (l != 0 && l != 1) throw MetricError("labels must be 0 or 1");
  }
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) {
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  return {pos, labels.size() - pos};
}

std::vector<std::size_t> order_by_score_desc(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

double compute_acc(std::span<const double> scores, std::span<const int> labels, double threshold) {
  check_sizes(scores, labels);
  if (scores.empty()) throw MetricError("accuracy of an empty score list");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int predicted = scores[i] >= threshold ? 1 : 0;
    if (predicted == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

double compute_auc(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores, labels);
  const auto [pos, neg] = class_counts(labels);
  if (pos == 0 || neg == 0) throw MetricError("AUC needs both classes");
  // Walk tie groups from the top score down. Each real is outscored by every
  // fake in an earlier group and ties with the fakes in its own group.
  const auto order = order_by_score_desc(scores);
  double wins = 0.0;
  std::size_t fakes_above = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::size_t group_pos = 0;
    std::size_t group_neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) ++group_pos;
      else ++group_neg;
      ++j;
    }
    wins += static_cast<double>(group_neg) * (static_cast<double>(fakes_above) + 0.5 * static_cast<double>(group_pos));
    fakes_above += group_pos;
    i = j;
  }
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

double compute_eer(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores, labels);
  const auto [pos, neg] = class_counts(labels);
  if (pos == 0 || neg == 0) throw MetricError("EER needs both classes");
  const auto order = order_by_score_desc(scores);
  // ROC vertices at every distinct threshold, from (0,0) to (1,1).
  double prev_fpr = 0.0;
  double prev_gap = 1.0;  // FNR - FPR at (0, 0)
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) ++tp;
      else ++fp;
      ++j;
    }
    const double fpr = static_cast<double>(fp) / static_cast<double>(neg);
    const double fnr = 1.0 - static_cast<double>(tp) / static_cast<double>(pos);
    const double gap = fnr - fpr;
    if (gap <= 0.0) {
      const double t = prev_gap / (prev_gap - gap);
      return prev_fpr + t * (fpr - prev_fpr);
    }
    prev_fpr = fpr;
    prev_gap = gap;
    i = j;
  }
  return 1.0;  // unreachable: the last vertex is (1, 1) with gap -1
}

EvalReport EvalReport::from_samples(std::vector<ScoredSample> samples) {
  EvalReport r;
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& s : samples) {
    scores.push_back(s.score);
    labels.push_back(s.label);
  }
  r.acc = compute_acc(scores, labels);
  r.auc = compute_auc(scores, labels);
  r.eer = compute_eer(scores, labels);
  r.samples = std::move(samples);
  return r;
}

}  // namespace pel
