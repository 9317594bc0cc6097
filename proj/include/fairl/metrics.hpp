#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairl/data.hpp"
#include "fairl/reward_model.hpp"
#include "json.hpp"

namespace fairl {

// Spread below this (L1 deviation, or variance for the affine fit) counts as constant.
inline constexpr double kDegenerateEps = 1e-12;

// s = (r - mean(r)) / ||r - mean(r)||_1. Throws DegenerateError for constant r.
std::vector<double> canonicalize_l1(std::span<const double> r);

// ||s_hat - s_gt||_1 over the L1 canonical forms; lies in [0, 2].
double starc_l1(std::span<const double> r_hat, std::span<const double> r_gt);

struct AffineFit {
  double a = 0.0;
  double b = 0.0;
  double mse = 0.0;
  bool clamped = false;  // unconstrained slope was <= 0 and a was set to the clamp value
};

// min over a > 0, b of mean((r_hat - (a r_gt + b))^2), closed form with a
// clamped to kDegenerateEps when the least-squares slope is not positive.
AffineFit affine_fit(std::span<const double> r_hat, std::span<const double> r_gt);
double starc_affine(std::span<const double> r_hat, std::span<const double> r_gt);

struct ThresholdChoice {
  double threshold = 0.0;
  double accuracy = 0.0;
};

// Predicts +1 iff score >= threshold. Candidates are -inf, +inf and the
// midpoints of consecutive distinct sorted scores; the smallest threshold
// wins ties. Throws std::invalid_argument for single-class labels.
ThresholdChoice select_threshold(std::span<const double> scores, std::span<const Label> labels);

double accuracy_at(std::span<const double> scores, std::span<const Label> labels, double threshold);

// Mann-Whitney AUC with tied scores contributing 1/2.
double roc_auc(std::span<const double> scores, std::span<const Label> labels);

struct ClassificationMetrics {
  double accuracy = 0.0;
  double f1 = 0.0;  // positive (+1) class; 0 when nothing is predicted or labeled positive
  double auc = 0.0;
  double threshold = 0.0;
  std::size_t n = 0;
};

ClassificationMetrics classification_metrics(std::span<const double> scores, std::span<const Label> labels,
                                             double threshold);

// Pairs are correct when delta > 0; ties count as incorrect.
double pair_accuracy(std::span<const double> deltas);

struct SliceReport {
  std::vector<std::size_t> members;  // pair indices with delta <= 0 or |delta| <= gamma
  std::size_t n_misclassified = 0;
  std::size_t n_near_tie = 0;
  double pair_accuracy = 0.0;
  // Output-level metrics over the labeled rows of the slice; absent when
  // the slice lacks either class.
  std::optional<ClassificationMetrics> classification;
  bool empty() const { return members.empty(); }
};

SliceReport failure_slice_metrics(const DualPathRewardModel& model, const EmbeddingMatrix& emb,
                                  std::span<const PreferencePair> pairs, double gamma, double threshold);

struct DisagreementCounts {
  std::size_t both_correct = 0;
  std::size_t only_a_correct = 0;
  std::size_t only_b_correct = 0;
  std::size_t neither = 0;
  std::size_t total() const { return both_correct + only_a_correct + only_b_correct + neither; }
};

struct DisagreementReport {
  DisagreementCounts overall;
  std::map<std::string, DisagreementCounts> by_subtype;
};

// Output-level correctness of two thresholded scorers over the same items.
// `subtypes`, when non-empty, must align with the scores; empty tags are skipped in the breakdown.
DisagreementReport disagreement(std::span<const double> scores_a, std::span<const double> scores_b,
                                std::span<const Label> labels, double threshold_a, double threshold_b,
                                std::span<const std::string> subtypes = {});

struct MetricsReport {
  std::string method;
  ClassificationMetrics test;
  double train_accuracy = 0.0;  // at the selected threshold
  double pair_accuracy = 0.0;
  std::optional<double> starc_l1;
  std::optional<double> starc_affine;
  std::optional<double> train_starc_l1;
  std::optional<SliceReport> slice;
  double slice_gamma = 0.0;
  std::optional<DisagreementReport> disagreement;

  nlohmann::ordered_json to_json() const;
};

// Threshold picked on the labeled train rows (0 when they lack a class),
// classification on the labeled test rows, STARC against `gt` over the rows
// each split references.
MetricsReport evaluate_model(const DualPathRewardModel& model, const Dataset& train, const Dataset& test,
                             const GroundTruth* gt, double slice_gamma, const std::string& method);

}  // namespace fairl
