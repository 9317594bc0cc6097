#include "fairl/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fairl {

std::string to_string(ObjectiveKind k) { return k == ObjectiveKind::max_margin ? "max-margin" : "max-entropy"; }

ObjectiveKind parse_objective_kind(const std::string& s) {
  if (s == "max-margin") return ObjectiveKind::max_margin;
  if (s == "max-entropy") return ObjectiveKind::max_entropy;
  throw std::invalid_argument("unknown objective \"" + s + "\" (expected max-margin or max-entropy)");
}

std::string to_string(Sharpening s) { return s == Sharpening::temperature ? "temperature" : "weight"; }

Sharpening parse_sharpening(const std::string& s) {
  if (s == "temperature") return Sharpening::temperature;
  if (s == "weight") return Sharpening::weight;
  throw std::invalid_argument("unknown sharpening \"" + s + "\" (expected temperature or weight)");
}

void ObjectiveConfig::validate(bool allow_degenerate) const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  };
  require(margin > 0.0 && std::isfinite(margin), "margin must be positive");
  require(tau > 0.0 && std::isfinite(tau), "tau must be positive");
  require(std::isfinite(margin_fail) && std::isfinite(tau_fail) && std::isfinite(w_fail),
          "failure parameters must be finite");
  if (allow_degenerate) {
    require(margin_fail >= margin, "margin_fail must be >= margin");
    require(tau_fail > 0.0 && tau_fail <= tau, "tau_fail must lie in (0, tau]");
    require(w_fail >= 1.0, "w_fail must be >= 1");
  } else {
    require(margin_fail > margin, "margin_fail must exceed margin");
    if (kind == ObjectiveKind::max_entropy) {
      if (sharpen == Sharpening::temperature)
        require(tau_fail > 0.0 && tau_fail < tau, "tau_fail must lie in (0, tau)");
      else
        require(w_fail > 1.0, "w_fail must exceed 1");
    }
  }
}

double hinge_loss(double delta, double m) {
  if (!(m > 0.0)) throw std::invalid_argument("hinge margin must be positive");
  return std::max(0.0, m - delta);
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double maxent_loss(double delta, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
  return softplus(-delta / tau);
}

namespace {

// d/d delta of softplus(-delta / tau) = -sigmoid(-delta / tau) / tau.
double maxent_dloss(double delta, double tau) {
  const double x = -delta / tau;
  const double sig = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return -sig / tau;
}

double hinge_dloss(double delta, double m) { return delta < m ? -1.0 : 0.0; }

}  // namespace

double base_pair_loss(double delta, const ObjectiveConfig& cfg) {
  return cfg.kind == ObjectiveKind::max_margin ? hinge_loss(delta, cfg.margin) : maxent_loss(delta, cfg.tau);
}

double fail_pair_loss(double delta, const ObjectiveConfig& cfg) {
  if (cfg.kind == ObjectiveKind::max_margin) return hinge_loss(delta, cfg.margin_fail);
  if (cfg.sharpen == Sharpening::temperature) return maxent_loss(delta, cfg.tau_fail);
  return cfg.w_fail * maxent_loss(delta, cfg.tau);
}

double base_pair_dloss(double delta, const ObjectiveConfig& cfg) {
  return cfg.kind == ObjectiveKind::max_margin ? hinge_dloss(delta, cfg.margin) : maxent_dloss(delta, cfg.tau);
}

double fail_pair_dloss(double delta, const ObjectiveConfig& cfg) {
  if (cfg.kind == ObjectiveKind::max_margin) return hinge_dloss(delta, cfg.margin_fail);
  if (cfg.sharpen == Sharpening::temperature) return maxent_dloss(delta, cfg.tau_fail);
  return cfg.w_fail * maxent_dloss(delta, cfg.tau);
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double batch_base_loss(const DualPathRewardModel& model, std::span<const PreferencePair> batch,
                       const EmbeddingMatrix& emb, const ObjectiveConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("batch_base_loss: empty batch");
  std::vector<double> terms;
  terms.reserve(batch.size());
  for (const auto& p : batch) terms.push_back(base_pair_loss(margin(model, p, emb), cfg));
  return pairwise_sum(terms) / static_cast<double>(batch.size());
}

double failure_loss(const DualPathRewardModel& model, std::span<const PreferencePair> batch,
                    std::span<const std::size_t> failures, const EmbeddingMatrix& emb,
                    const ObjectiveConfig& cfg) {
  if (failures.empty()) return 0.0;
  std::vector<double> terms;
  terms.reserve(failures.size());
  for (std::size_t i : failures) {
    if (i >= batch.size()) throw std::out_of_range("failure index outside the batch");
    terms.push_back(fail_pair_loss(margin(model, batch[i], emb), cfg));
  }
  return pairwise_sum(terms) / static_cast<double>(failures.size());
}

namespace {

void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be finite and non-negative");
}

}  // namespace

LossBreakdown combined_loss(const DualPathRewardModel& model, std::span<const PreferencePair> batch,
                            std::span<const std::size_t> failures, double lambda, const EmbeddingMatrix& emb,
                            const ObjectiveConfig& cfg) {
  check_lambda(lambda);
  LossBreakdown out;
  out.base = batch_base_loss(model, batch, emb, cfg);
  out.fail = failure_loss(model, batch, failures, emb, cfg);
  out.l2 = failure_path_l2(model);
  out.lambda = lambda;
  out.total = out.base + lambda * out.fail + 0.5 * lambda * out.l2;
  return out;
}

LossBreakdown combined_loss_and_grad(const DualPathRewardModel& model, std::span<const PreferencePair> batch,
                                     std::span<const double> deltas, std::span<const std::size_t> failures,
                                     double lambda, const EmbeddingMatrix& emb, const ObjectiveConfig& cfg,
                                     std::span<double> grad, bool include_failure_path) {
  check_lambda(lambda);
  if (batch.empty()) throw std::invalid_argument("combined loss: empty batch");
  if (deltas.size() != batch.size()) throw std::invalid_argument("combined loss: margins do not match the batch");
  if (grad.size() != model.param_count()) throw std::invalid_argument("combined loss: gradient size mismatch");
  std::fill(grad.begin(), grad.end(), 0.0);

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double inv_s = failures.empty() ? 0.0 : 1.0 / static_cast<double>(failures.size());

  // dL/dDelta_i, accumulated per pair so each row is visited once.
  std::vector<double> coeff(batch.size());
  std::vector<double> base_terms(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    base_terms[i] = base_pair_loss(deltas[i], cfg);
    coeff[i] = base_pair_dloss(deltas[i], cfg) * inv_b;
  }
  std::vector<double> fail_terms;
  fail_terms.reserve(failures.size());
  for (std::size_t i : failures) {
    if (i >= batch.size()) throw std::out_of_range("failure index outside the batch");
    fail_terms.push_back(fail_pair_loss(deltas[i], cfg));
    coeff[i] += lambda * fail_pair_dloss(deltas[i], cfg) * inv_s;
  }

  LossBreakdown out;
  out.base = pairwise_sum(base_terms) * inv_b;
  out.fail = failures.empty() ? 0.0 : pairwise_sum(fail_terms) * inv_s;
  out.l2 = failure_path_l2(model);
  out.lambda = lambda;
  out.total = out.base + lambda * out.fail + 0.5 * lambda * out.l2;

  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (coeff[i] == 0.0) continue;
    model.add_score_gradient(emb.row(batch[i].pos), coeff[i], grad, include_failure_path);
    model.add_score_gradient(emb.row(batch[i].neg), -coeff[i], grad, include_failure_path);
  }
  if (lambda > 0.0 && include_failure_path) {
    const auto params = model.params();
    for (std::size_t k = model.path_offset(Path::failure); k < params.size(); ++k)
      if (model.is_failure_weight(k)) grad[k] += lambda * params[k];
  }
  return out;
}

std::vector<double> grad_combined(const DualPathRewardModel& model, std::span<const PreferencePair> batch,
                                  std::span<const std::size_t> failures, double lambda,
                                  const EmbeddingMatrix& emb, const ObjectiveConfig& cfg) {
  std::vector<double> grad(model.param_count());
  const auto deltas = margins(model, batch, emb);
  combined_loss_and_grad(model, batch, deltas, failures, lambda, emb, cfg, grad);
  return grad;
}

}  // namespace fairl
