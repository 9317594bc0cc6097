#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairl/data.hpp"
#include "fairl/objectives.hpp"
#include "fairl/reward_model.hpp"

namespace fairl {

using IndexSet = std::vector<std::size_t>;  // sorted ascending unless noted

// Supervised failure criterion.
//   misclassified: flag the pair if a labeled side has y(o) R(o) <= 0.
//   pairwise:      the asymmetric form y(o+) R(o+) <= 0 or y(o-) R(o-) >= 0.
enum class SupervisedRule { misclassified, pairwise };
std::string to_string(SupervisedRule r);
SupervisedRule parse_supervised_rule(const std::string& s);

enum class Curriculum { threshold, bottom_k };
std::string to_string(Curriculum c);
Curriculum parse_curriculum(const std::string& s);

enum class LambdaDecay { exponential, constant };
std::string to_string(LambdaDecay d);
LambdaDecay parse_lambda_decay(const std::string& s);

struct ScheduleConfig {
  // Unset means: M for max-margin, 0.5 for max-entropy.
  std::optional<double> gamma_start;
  double gamma_end = 0.0;
  double lambda_init = 10.0;
  LambdaDecay lambda_decay = LambdaDecay::exponential;
  // lambda_T = lambda_init * lambda_final_ratio under exponential decay.
  double lambda_final_ratio = 0.01;
  double p_rate = 1.0;
  Curriculum curriculum = Curriculum::threshold;
  std::size_t rounds = 100;
  double fail_frac_start = 0.2;
  double fail_frac_end = 0.0;
  SupervisedRule supervised_rule = SupervisedRule::misclassified;

  double resolved_gamma_start(const ObjectiveConfig& obj) const;
  void validate() const;
};

struct ScheduleState {
  std::size_t t = 0;
  double gamma = 0.0;
  double lambda = 0.0;
  double p = 1.0;
  std::optional<std::size_t> k;
};

struct FailureSet {
  IndexSet margin;
  IndexSet supervised;
  IndexSet all;  // margin U supervised
};

// {i : deltas[i] <= gamma}.
IndexSet margin_failures(std::span<const double> deltas, double gamma);

IndexSet supervised_failures(const DualPathRewardModel& model, std::span<const PreferencePair> batch,
                             const EmbeddingMatrix& emb, SupervisedRule rule = SupervisedRule::misclassified);

IndexSet set_union(std::span<const std::size_t> a, std::span<const std::size_t> b);

// Keeps each element independently with probability p; the draw is a pure
// function of (failures, p, seed, t).
IndexSet sample_failures(std::span<const std::size_t> failures, double p, std::uint64_t seed, std::uint64_t t);

// lambda_t = lambda_0 exp(-kappa t) with kappa = -ln(lambda_final_ratio) / T;
// gamma_t linear from gamma_start to gamma_end; p_t constant.
ScheduleState schedule_step(const ScheduleConfig& cfg, const ObjectiveConfig& obj, std::size_t t, std::size_t total);

// Indices of the k smallest margins ordered by (delta, index).
IndexSet bottom_k(std::span<const double> deltas, std::size_t k);

// Linear interpolation from f_start (r = 0) to f_end (r = R).
double fraction_schedule(std::size_t r, std::size_t total_rounds, double f_start, double f_end);

// round(fraction * batch), ties to even.
std::size_t failure_count(double fraction, std::size_t batch);

}  // namespace fairl
