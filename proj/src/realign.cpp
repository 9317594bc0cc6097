#include "fairl/realign.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "fairl/error.hpp"
#include "fairl/reward_model.hpp"
#include "fairl/rng.hpp"

namespace fairl {

double BanditEnv::toxic_fraction() const {
  if (labels.empty()) return 0.0;
  const auto toxic = std::count(labels.begin(), labels.end(), Label{-1});
  return static_cast<double>(toxic) / static_cast<double>(labels.size());
}

void BanditEnv::validate() const {
  if (k < 2) throw std::invalid_argument("bandit env needs at least two candidates per context");
  if (n_contexts < 1) throw std::invalid_argument("bandit env has no contexts");
  const std::size_t rows = n_contexts * k;
  if (candidates.count() != rows || labels.size() != rows || base_logits.size() != rows)
    throw std::invalid_argument("bandit env arrays disagree in size");
  for (std::size_t c = 0; c < n_contexts; ++c) {
    bool has_pos = false, has_neg = false;
    for (std::size_t j = 0; j < k; ++j) {
      has_pos |= labels[c * k + j] == 1;
      has_neg |= labels[c * k + j] == -1;
    }
    if (!has_pos || !has_neg) throw std::invalid_argument("context " + std::to_string(c) + " lacks one of the labels");
  }
}

BanditEnv gen_bandit_env(const GroundTruth& gt, const BanditConfig& cfg) {
  if (cfg.n_candidates < 2) throw std::invalid_argument("K must be at least 2");
  if (cfg.n_contexts < 1) throw std::invalid_argument("n_contexts must be at least 1");
  if (!(cfg.context_spread > 0.0 && cfg.context_spread <= 1.0))
    throw std::invalid_argument("context_spread must lie in (0, 1]");
  const std::size_t d = gt.theta_star.size();
  if (d == 0) throw std::invalid_argument("ground truth has no dimension");
  BanditEnv env;
  env.n_contexts = cfg.n_contexts;
  env.k = cfg.n_candidates;
  env.candidates = EmbeddingMatrix(d, env.n_contexts * env.k);
  env.labels.resize(env.n_contexts * env.k);
  env.base_logits.assign(env.n_contexts * env.k, 0.0);

  const double s = cfg.context_spread;
  const double center_sd = std::sqrt(std::max(0.0, 1.0 - s * s));
  const std::size_t want_toxic = env.k / 2;
  std::vector<double> center(d);
  for (std::size_t c = 0; c < env.n_contexts; ++c) {
    Rng rng(cfg.seed, 0xBA0000ULL + c);
    // Whole contexts are rejected, so accepted ones follow the conditional
    // law given the label constraint.
    bool accepted = false;
    for (int attempt = 0; attempt < 1'000'000 && !accepted; ++attempt) {
      for (double& v : center) v = center_sd * rng.normal();
      std::size_t toxic = 0;
      for (std::size_t j = 0; j < env.k; ++j) {
        auto row = env.candidates.row(c * env.k + j);
        for (std::size_t i = 0; i < d; ++i) row[i] = static_cast<float>(center[i] + s * rng.normal());
        env.labels[c * env.k + j] = gt.label(row);
        toxic += env.labels[c * env.k + j] == -1;
      }
      accepted = cfg.label_balanced ? toxic == want_toxic : toxic > 0 && toxic < env.k;
    }
    if (!accepted) throw std::runtime_error("gen_bandit_env: label constraint has negligible mass; check label_threshold");
  }
  env.validate();
  return env;
}

namespace {

double phi_score(const Policy& p, std::span<const float> h) {
  double s = p.bias;
  for (std::size_t i = 0; i < h.size(); ++i) s += p.phi[i] * static_cast<double>(h[i]);
  return s;
}

// Log-softmax of the reference logits for one context.
std::vector<double> log_softmax(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  const double lse = m + std::log(s);
  std::vector<double> out(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) out[j] = z[j] - lse;
  return out;
}

std::vector<double> policy_log_probs(const Policy& p, const BanditEnv& env, std::size_t c) {
  std::vector<double> z(env.k);
  for (std::size_t j = 0; j < env.k; ++j) z[j] = env.base_logits[c * env.k + j] + phi_score(p, env.candidate(c, j));
  return log_softmax(z);
}

std::vector<double> base_log_probs(const BanditEnv& env, std::size_t c) {
  return log_softmax(std::span<const double>(env.base_logits).subspan(c * env.k, env.k));
}

void check_policy(const Policy& p, const BanditEnv& env) {
  if (p.phi.size() != env.candidates.dim()) throw std::invalid_argument("policy dimension does not match the env");
}

}  // namespace

std::vector<double> Policy::distribution(const BanditEnv& env, std::size_t c) const {
  check_policy(*this, env);
  auto lp = policy_log_probs(*this, env, c);
  for (double& v : lp) v = std::exp(v);
  return lp;
}

Policy base_policy(const BanditEnv& env) { return Policy{std::vector<double>(env.candidates.dim(), 0.0), 0.0}; }

void PolicyTrainConfig::validate() const {
  if (!(kl_coef >= 0.0) || std::isnan(kl_coef)) throw std::invalid_argument("kl_coef must be non-negative");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning_rate must be positive");
  if (record_every < 1) throw std::invalid_argument("record_every must be at least 1");
}

std::vector<double> candidate_rewards(const BanditEnv& env, const RewardFn& reward, bool normalize) {
  std::vector<double> r(env.candidates.count());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = reward(env.candidates.row(i));
  if (normalize) {
    const double n = static_cast<double>(r.size());
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / n;
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    if (!(sd > 1e-12)) throw DegenerateError("reward is constant over the env candidates");
    for (double& v : r) v = (v - mean) / sd;
  }
  for (double v : r)
    if (!std::isfinite(v)) throw DivergenceError("reward function returned a non-finite value");
  return r;
}

double policy_objective(const Policy& policy, const BanditEnv& env, std::span<const double> rewards, double kl_coef) {
  check_policy(policy, env);
  double total = 0.0;
  for (std::size_t c = 0; c < env.n_contexts; ++c) {
    const auto lp = policy_log_probs(policy, env, c);
    const auto lq = base_log_probs(env, c);
    double er = 0.0, kl = 0.0;
    for (std::size_t j = 0; j < env.k; ++j) {
      const double p = std::exp(lp[j]);
      er += p * rewards[c * env.k + j];
      kl += p * (lp[j] - lq[j]);
    }
    total += er - kl_coef * kl;
  }
  return total / static_cast<double>(env.n_contexts);
}

double mean_kl(const Policy& policy, const BanditEnv& env) {
  check_policy(policy, env);
  double total = 0.0;
  for (std::size_t c = 0; c < env.n_contexts; ++c) {
    const auto lp = policy_log_probs(policy, env, c);
    const auto lq = base_log_probs(env, c);
    double kl = 0.0;
    for (std::size_t j = 0; j < env.k; ++j) kl += std::exp(lp[j]) * (lp[j] - lq[j]);
    total += std::max(kl, 0.0);
  }
  return total / static_cast<double>(env.n_contexts);
}

double toxicity_rate(const Policy& policy, const BanditEnv& env) {
  check_policy(policy, env);
  double total = 0.0;
  for (std::size_t c = 0; c < env.n_contexts; ++c) {
    const auto p = policy.distribution(env, c);
    for (std::size_t j = 0; j < env.k; ++j)
      if (env.labels[c * env.k + j] == -1) total += p[j];
  }
  return total / static_cast<double>(env.n_contexts);
}

PolicyTrainResult train_policy(const BanditEnv& env, const RewardFn& reward, const PolicyTrainConfig& cfg) {
  cfg.validate();
  env.validate();
  const auto rewards = candidate_rewards(env, reward, cfg.normalize_rewards);
  const std::size_t d = env.candidates.dim();
  PolicyTrainResult res;
  res.policy = base_policy(env);
  auto record = [&](std::size_t step) {
    const double obj = policy_objective(res.policy, env, rewards, cfg.kl_coef);
    if (!std::isfinite(obj)) throw DivergenceError("policy objective became non-finite at step " + std::to_string(step));
    res.trace.push_back({step, toxicity_rate(res.policy, env), obj});
  };
  record(0);

  std::vector<std::size_t> contexts(env.n_contexts);
  std::iota(contexts.begin(), contexts.end(), std::size_t{0});
  const bool minibatch = cfg.batch_contexts > 0 && cfg.batch_contexts < env.n_contexts;
  std::vector<double> grad_phi(d);
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    if (minibatch) {
      Rng rng(cfg.seed, 0x9A1100ULL + step);
      const auto perm = rng.permutation(env.n_contexts);
      contexts.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(cfg.batch_contexts));
    }
    std::fill(grad_phi.begin(), grad_phi.end(), 0.0);
    // dJ/dz_j = pi_j (f_j - E_pi[f]) with f = r - kl_coef * (log pi - log pi_base).
    for (std::size_t c : contexts) {
      const auto lp = policy_log_probs(res.policy, env, c);
      const auto lq = base_log_probs(env, c);
      std::vector<double> p(env.k), f(env.k);
      double fbar = 0.0;
      for (std::size_t j = 0; j < env.k; ++j) {
        p[j] = std::exp(lp[j]);
        f[j] = rewards[c * env.k + j] - cfg.kl_coef * (lp[j] - lq[j]);
        fbar += p[j] * f[j];
      }
      for (std::size_t j = 0; j < env.k; ++j) {
        const double g = p[j] * (f[j] - fbar);
        const auto h = env.candidate(c, j);
        for (std::size_t i = 0; i < d; ++i) grad_phi[i] += g * static_cast<double>(h[i]);
      }
    }
    const double scale = cfg.learning_rate / static_cast<double>(contexts.size());
    for (std::size_t i = 0; i < d; ++i) {
      if (!std::isfinite(grad_phi[i])) throw DivergenceError("policy gradient became non-finite at step " + std::to_string(step));
      res.policy.phi[i] += scale * grad_phi[i];
    }
    if (step % cfg.record_every == 0 || step == cfg.steps) record(step);
  }
  return res;
}

const RewardRate& ComparisonReport::at(const std::string& id) const {
  for (const auto& r : rates)
    if (r.id == id) return r;
  throw std::out_of_range("no reward named '" + id + "' in the comparison");
}

bool ComparisonReport::ordering_holds(double tol) const {
  const double gt = at("gt").toxicity_rate, fa = at("fa").toxicity_rate, base = at("baseline").toxicity_rate;
  return gt <= fa + tol && fa <= base + tol;
}

ComparisonReport compare_rewards(const BanditEnv& env, const std::vector<std::pair<std::string, RewardFn>>& rewards,
                                 const PolicyTrainConfig& cfg) {
  if (rewards.empty()) throw std::invalid_argument("compare_rewards needs at least one reward");
  ComparisonReport rep;
  rep.untrained_rate = toxicity_rate(base_policy(env), env);
  for (const auto& [id, fn] : rewards) {
    auto res = train_policy(env, fn, cfg);
    rep.rates.push_back({id, toxicity_rate(res.policy, env), mean_kl(res.policy, env), std::move(res.trace)});
  }
  std::vector<std::size_t> order(rep.rates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rep.rates[a].toxicity_rate < rep.rates[b].toxicity_rate; });
  for (std::size_t i = 0; i < order.size(); ++i) {
    rep.ascending.push_back(rep.rates[order[i]].id);
    if (i + 1 < order.size())
      rep.tied_with_next.push_back(std::abs(rep.rates[order[i]].toxicity_rate - rep.rates[order[i + 1]].toxicity_rate) <= 1e-12);
  }
  return rep;
}

double RealignSummary::mean_rate(const std::string& id) const {
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] == id) return mean_rates[i];
  throw std::out_of_range("no reward named '" + id + "' in the summary");
}

bool RealignSummary::ordering_holds(double tol) const {
  return mean_rate("gt") <= mean_rate("fa") + tol && mean_rate("fa") <= mean_rate("baseline") + tol;
}

RealignSummary summarize(std::vector<std::uint64_t> seeds, std::vector<ComparisonReport> reports) {
  if (reports.empty() || seeds.size() != reports.size()) throw std::invalid_argument("summarize: seeds and reports disagree");
  RealignSummary s;
  s.seeds = std::move(seeds);
  s.per_seed = std::move(reports);
  for (const auto& r : s.per_seed.front().rates) s.ids.push_back(r.id);
  s.mean_rates.assign(s.ids.size(), 0.0);
  for (const auto& rep : s.per_seed) {
    s.mean_untrained_rate += rep.untrained_rate;
    for (std::size_t i = 0; i < s.ids.size(); ++i) s.mean_rates[i] += rep.at(s.ids[i]).toxicity_rate;
  }
  const double n = static_cast<double>(s.per_seed.size());
  s.mean_untrained_rate /= n;
  for (double& m : s.mean_rates) m /= n;
  return s;
}

void write_rate_csv(std::ostream& out, const ComparisonReport& report) {
  out << "step,reward_id,toxicity_rate\n";
  for (const auto& r : report.rates)
    for (const auto& pt : r.trace) out << pt.step << ',' << r.id << ',' << format_double(pt.toxicity_rate) << '\n';
}

void write_rate_csv(const std::filesystem::path& path, const ComparisonReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_rate_csv(out, report);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace fairl
