#pragma once

#include <span>
#include <string>
#include <vector>

#include "fairl/data.hpp"
#include "fairl/reward_model.hpp"

namespace fairl {

enum class ObjectiveKind { max_margin, max_entropy };
// How max-entropy failure terms are made stricter than the base term.
enum class Sharpening { temperature, weight };

std::string to_string(ObjectiveKind k);
ObjectiveKind parse_objective_kind(const std::string& s);
std::string to_string(Sharpening s);
Sharpening parse_sharpening(const std::string& s);

struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::max_entropy;
  double margin = 0.8;       // M
  double margin_fail = 1.6;  // M_fail
  double tau = 1.0;
  double tau_fail = 0.5;
  double w_fail = 2.0;
  Sharpening sharpen = Sharpening::temperature;

  // Strict mode requires M_fail > M, tau_fail < tau, w_fail > 1. With
  // allow_degenerate the failure terms may coincide with the base terms.
  void validate(bool allow_degenerate = false) const;
};

// max(0, M - delta).
double hinge_loss(double delta, double m);
// log(1 + exp(-delta / tau)), evaluated as a stable softplus.
double maxent_loss(double delta, double tau);
double softplus(double x);

// Per-pair loss and its derivative in delta for the base and failure terms.
double base_pair_loss(double delta, const ObjectiveConfig& cfg);
double fail_pair_loss(double delta, const ObjectiveConfig& cfg);
double base_pair_dloss(double delta, const ObjectiveConfig& cfg);
double fail_pair_dloss(double delta, const ObjectiveConfig& cfg);

// Index-ordered pairwise summation.
double pairwise_sum(std::span<const double> values);

double batch_base_loss(const DualPathRewardModel& model, std::span<const PreferencePair> batch,
                       const EmbeddingMatrix& emb, const ObjectiveConfig& cfg);

// Mean failure loss over batch[failures[i]]; 0 for an empty subset.
double failure_loss(const DualPathRewardModel& model, std::span<const PreferencePair> batch,
                    std::span<const std::size_t> failures, const EmbeddingMatrix& emb,
                    const ObjectiveConfig& cfg);

struct LossBreakdown {
  double base = 0.0;
  double fail = 0.0;
  double l2 = 0.0;  // ||w_F||^2
  double lambda = 0.0;
  double total = 0.0;  // base + lambda * fail + lambda / 2 * l2
};

LossBreakdown combined_loss(const DualPathRewardModel& model, std::span<const PreferencePair> batch,
                            std::span<const std::size_t> failures, double lambda, const EmbeddingMatrix& emb,
                            const ObjectiveConfig& cfg);

// Gradient of combined_loss, same layout as model.params(). The hinge
// subgradient at delta == M is 0.
std::vector<double> grad_combined(const DualPathRewardModel& model, std::span<const PreferencePair> batch,
                                  std::span<const std::size_t> failures, double lambda,
                                  const EmbeddingMatrix& emb, const ObjectiveConfig& cfg);

// Both at once from a single pass over the margins. `deltas` must hold
// the batch margins under `model`.
LossBreakdown combined_loss_and_grad(const DualPathRewardModel& model, std::span<const PreferencePair> batch,
                                     std::span<const double> deltas, std::span<const std::size_t> failures,
                                     double lambda, const EmbeddingMatrix& emb, const ObjectiveConfig& cfg,
                                     std::span<double> grad, bool include_failure_path = true);

}  // namespace fairl
