#include "fairl/failure_mining.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fairl/rng.hpp"

namespace fairl {

std::string to_string(SupervisedRule r) { return r == SupervisedRule::misclassified ? "misclassified" : "pairwise"; }

SupervisedRule parse_supervised_rule(const std::string& s) {
  if (s == "misclassified") return SupervisedRule::misclassified;
  if (s == "pairwise") return SupervisedRule::pairwise;
  throw std::invalid_argument("unknown supervised rule \"" + s + "\" (expected misclassified or pairwise)");
}

std::string to_string(Curriculum c) { return c == Curriculum::threshold ? "threshold" : "bottom-k"; }

Curriculum parse_curriculum(const std::string& s) {
  if (s == "threshold") return Curriculum::threshold;
  if (s == "bottom-k") return Curriculum::bottom_k;
  throw std::invalid_argument("unknown curriculum \"" + s + "\" (expected threshold or bottom-k)");
}

std::string to_string(LambdaDecay d) { return d == LambdaDecay::exponential ? "exp" : "constant"; }

LambdaDecay parse_lambda_decay(const std::string& s) {
  if (s == "exp") return LambdaDecay::exponential;
  if (s == "constant") return LambdaDecay::constant;
  throw std::invalid_argument("unknown lambda_decay \"" + s + "\" (expected exp or constant)");
}

double ScheduleConfig::resolved_gamma_start(const ObjectiveConfig& obj) const {
  if (gamma_start) return *gamma_start;
  return obj.kind == ObjectiveKind::max_margin ? obj.margin : 0.5;
}

void ScheduleConfig::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  };
  require(!gamma_start || std::isfinite(*gamma_start), "gamma_start must be finite");
  require(std::isfinite(gamma_end), "gamma_end must be finite");
  require(!gamma_start || *gamma_start >= gamma_end, "gamma_start must be >= gamma_end");
  require(lambda_init >= 0.0 && std::isfinite(lambda_init), "lambda_init must be finite and non-negative");
  require(lambda_final_ratio > 0.0 && lambda_final_ratio <= 1.0, "lambda_final_ratio must lie in (0, 1]");
  require(p_rate >= 0.0 && p_rate <= 1.0, "p_rate must lie in [0, 1]");
  require(fail_frac_start >= 0.0 && fail_frac_start <= 1.0, "fail_frac_start must lie in [0, 1]");
  require(fail_frac_end >= 0.0 && fail_frac_end <= 1.0, "fail_frac_end must lie in [0, 1]");
  require(rounds >= 1, "rounds must be at least 1");
}

IndexSet margin_failures(std::span<const double> deltas, double gamma) {
  IndexSet out;
  for (std::size_t i = 0; i < deltas.size(); ++i)
    if (deltas[i] <= gamma) out.push_back(i);
  return out;
}

IndexSet supervised_failures(const DualPathRewardModel& model, std::span<const PreferencePair> batch,
                             const EmbeddingMatrix& emb, SupervisedRule rule) {
  IndexSet out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& p = batch[i];
    bool flagged = false;
    if (p.pos_label) flagged = *p.pos_label * model.score(emb.row(p.pos)) <= 0.0;
    if (!flagged && p.neg_label) {
      const double yr = *p.neg_label * model.score(emb.row(p.neg));
      flagged = rule == SupervisedRule::misclassified ? yr <= 0.0 : yr >= 0.0;
    }
    if (flagged) out.push_back(i);
  }
  return out;
}

IndexSet set_union(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  IndexSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

IndexSet sample_failures(std::span<const std::size_t> failures, double p, std::uint64_t seed, std::uint64_t t) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("sampling rate must lie in [0, 1]");
  if (p == 1.0) return {failures.begin(), failures.end()};
  IndexSet out;
  if (p == 0.0) return out;
  Rng rng(seed, 0xFA11ULL ^ mix64(t));
  for (std::size_t i : failures)
    if (rng.bernoulli(p)) out.push_back(i);
  return out;
}

ScheduleState schedule_step(const ScheduleConfig& cfg, const ObjectiveConfig& obj, std::size_t t, std::size_t total) {
  cfg.validate();
  if (t > total) throw std::invalid_argument("schedule step beyond the horizon");
  const double g0 = cfg.resolved_gamma_start(obj);
  if (g0 < cfg.gamma_end) throw std::invalid_argument("gamma schedule must be non-increasing");
  ScheduleState s;
  s.t = t;
  s.p = cfg.p_rate;
  if (total == 0) {
    s.gamma = g0;
    s.lambda = cfg.lambda_init;
    return s;
  }
  const double frac = static_cast<double>(t) / static_cast<double>(total);
  s.gamma = g0 + (cfg.gamma_end - g0) * frac;
  if (cfg.lambda_decay == LambdaDecay::exponential) {
    const double kappa = -std::log(cfg.lambda_final_ratio) / static_cast<double>(total);
    s.lambda = cfg.lambda_init * std::exp(-kappa * static_cast<double>(t));
  } else {
    s.lambda = cfg.lambda_init;
  }
  return s;
}

IndexSet bottom_k(std::span<const double> deltas, std::size_t k) {
  if (k > deltas.size()) throw std::invalid_argument("bottom_k: k exceeds the batch size");
  IndexSet idx(deltas.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return deltas[a] < deltas[b] || (deltas[a] == deltas[b] && a < b); });
  idx.resize(k);
  return idx;
}

double fraction_schedule(std::size_t r, std::size_t total_rounds, double f_start, double f_end) {
  if (!(f_start >= 0.0 && f_start <= 1.0 && f_end >= 0.0 && f_end <= 1.0))
    throw std::invalid_argument("failure fractions must lie in [0, 1]");
  if (r > total_rounds) throw std::invalid_argument("round beyond the schedule");
  if (total_rounds == 0) return f_end;
  const double frac = static_cast<double>(r) / static_cast<double>(total_rounds);
  return f_start + (f_end - f_start) * frac;
}

std::size_t failure_count(double fraction, std::size_t batch) {
  return static_cast<std::size_t>(std::nearbyint(fraction * static_cast<double>(batch)));
}

}  // namespace fairl
