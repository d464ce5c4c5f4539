#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pel {

/// Fraction of samples whose predicted class (score >= threshold means
/// fake) matches the label.
double compute_acc(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

/// Mann-Whitney AUC: probability a fake outscores a real, ties count half.
/// Needs at least one sample of each class.
double compute_auc(std::span<const double> scores, std::span<const int> labels);

/// ROC operating point where FPR equals FNR, linearly interpolated between
/// adjacent ROC vertices.
double compute_eer(std::span<const double> scores, std::span<const int> labels);

struct ScoredSample {
  std::string id;
  int label = 0;
  double score = 0.0;
};

struct PerturbDelta {
  std::string kind;
  double strength = 0.0;
  double acc = 0.0;
  double auc = 0.0;
  double delta_acc = 0.0;  // perturbed - clean
  double delta_auc = 0.0;
};

struct EvalReport {
  double acc = 0.0;
  double auc = 0.0;
  double eer = 0.0;
  std::vector<ScoredSample> samples;
  std::vector<PerturbDelta> deltas;

  /// Aggregates recomputed from the per-sample triples.
  static EvalReport from_samples(std::vector<ScoredSample> samples);
};

}  // namespace pel
