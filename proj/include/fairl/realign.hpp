#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fairl/data.hpp"

namespace fairl {

struct BanditConfig {
  std::size_t n_contexts = 500;
  std::size_t n_candidates = 8;  // K
  // Each context gets exactly floor(K/2) toxic candidates; otherwise any
  // mix with at least one of each label.
  bool label_balanced = true;
  // Candidates are center + spread * eps with center ~ N(0, (1 - spread^2) I),
  // so each row is marginally N(0, I) before the label constraint while
  // completions of one context stay correlated. 1 gives independent
  // candidates. Balancing a tight context pulls its center toward the label
  // boundary, shrinking the spread along theta*.
  double context_spread = 0.1;
  std::uint64_t seed = 0;
};

// One-step contextual bandit. Candidate j of context c lives in row c*K + j.
struct BanditEnv {
  std::size_t n_contexts = 0;
  std::size_t k = 0;
  EmbeddingMatrix candidates;
  std::vector<Label> labels;
  std::vector<double> base_logits;  // per-row logits of the reference policy

  std::span<const float> candidate(std::size_t c, std::size_t j) const { return candidates.row(c * k + j); }
  double toxic_fraction() const;
  void validate() const;
};

BanditEnv gen_bandit_env(const GroundTruth& gt, const BanditConfig& cfg);

// Softmax over base_logits + phi^T h + bias. The bias shifts every candidate
// of a context equally, so it never changes the distribution.
struct Policy {
  std::vector<double> phi;
  double bias = 0.0;

  std::vector<double> distribution(const BanditEnv& env, std::size_t c) const;
};

Policy base_policy(const BanditEnv& env);

using RewardFn = std::function<double(std::span<const float>)>;

struct PolicyTrainConfig {
  double kl_coef = 0.05;
  std::size_t steps = 300;
  double learning_rate = 0.5;
  // Contexts per gradient step; 0 uses all of them. Subsets are drawn from the seed.
  std::size_t batch_contexts = 0;
  // Rewards are z-scored over all env candidates so that one kl_coef suits
  // scorers with different scales.
  bool normalize_rewards = true;
  std::size_t record_every = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

// Reward per candidate row, optionally z-scored.
std::vector<double> candidate_rewards(const BanditEnv& env, const RewardFn& reward, bool normalize);

// Mean over contexts of E_pi[r] - kl_coef * KL(pi || pi_base).
double policy_objective(const Policy& policy, const BanditEnv& env, std::span<const double> rewards, double kl_coef);
double mean_kl(const Policy& policy, const BanditEnv& env);
double toxicity_rate(const Policy& policy, const BanditEnv& env);

struct RatePoint {
  std::size_t step = 0;
  double toxicity_rate = 0.0;
  double objective = 0.0;
};

struct PolicyTrainResult {
  Policy policy;
  std::vector<RatePoint> trace;  // step 0, every record_every steps, and the last step
};

PolicyTrainResult train_policy(const BanditEnv& env, const RewardFn& reward, const PolicyTrainConfig& cfg);

struct RewardRate {
  std::string id;
  double toxicity_rate = 0.0;
  double kl = 0.0;
  std::vector<RatePoint> trace;
};

struct ComparisonReport {
  double untrained_rate = 0.0;
  std::vector<RewardRate> rates;            // input order
  std::vector<std::string> ascending;       // ids by rate
  std::vector<bool> tied_with_next;         // ascending[i] ties ascending[i+1]

  const RewardRate& at(const std::string& id) const;
  // rate(gt) <= rate(fa) <= rate(baseline), within `tol`.
  bool ordering_holds(double tol = 1e-12) const;
};

ComparisonReport compare_rewards(const BanditEnv& env, const std::vector<std::pair<std::string, RewardFn>>& rewards,
                                 const PolicyTrainConfig& cfg);

// Per-seed reports to means; ordering is evaluated on the means.
struct RealignSummary {
  std::vector<std::uint64_t> seeds;
  std::vector<ComparisonReport> per_seed;
  std::vector<std::string> ids;
  std::vector<double> mean_rates;
  double mean_untrained_rate = 0.0;

  double mean_rate(const std::string& id) const;
  bool ordering_holds(double tol = 1e-12) const;
};

RealignSummary summarize(std::vector<std::uint64_t> seeds, std::vector<ComparisonReport> reports);

// Columns step,reward_id,toxicity_rate.
void write_rate_csv(std::ostream& out, const ComparisonReport& report);
void write_rate_csv(const std::filesystem::path& path, const ComparisonReport& report);

}  // namespace fairl
