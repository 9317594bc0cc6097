#include "fairl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "fairl/error.hpp"
#include "fairl/rng.hpp"

namespace fairl {

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::baseline: return "baseline";
    case TrainMode::fa_supervised: return "fa-supervised";
    case TrainMode::fa_margin: return "fa-margin";
    case TrainMode::fa_self_supervised: return "fa-self-supervised";
  }
  return "baseline";
}

TrainMode parse_train_mode(const std::string& s) {
  if (s == "baseline") return TrainMode::baseline;
  if (s == "fa-supervised") return TrainMode::fa_supervised;
  if (s == "fa-margin") return TrainMode::fa_margin;
  if (s == "fa-self-supervised") return TrainMode::fa_self_supervised;
  throw std::invalid_argument("unknown mode \"" + s +
                              "\" (expected baseline, fa-supervised, fa-margin or fa-self-supervised)");
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer_kind(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw std::invalid_argument("unknown optimizer \"" + s + "\" (expected adam or sgd)");
}

void TrainConfig::validate() const {
  objective.validate();
  schedule.validate();
  if (schedule.resolved_gamma_start(objective) < schedule.gamma_end)
    throw std::invalid_argument("gamma schedule must be non-increasing");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning_rate must be positive");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw std::invalid_argument("val_fraction must lie in [0, 1)");
  if (!(min_delta >= 0.0)) throw std::invalid_argument("min_delta must be non-negative");
}

std::size_t TrainConfig::resolved_epochs_per_round() const {
  if (epochs_per_round > 0) return epochs_per_round;
  return std::max<std::size_t>(1, epochs / schedule.rounds);
}

std::size_t TrainConfig::planned_epochs() const {
  return mode == TrainMode::fa_self_supervised ? schedule.rounds * resolved_epochs_per_round() : epochs;
}

// ---------------------------------------------------------------------------

void TrainHistory::write_csv(std::ostream& out) const {
  out << "t,epoch,loss_base,loss_fail,failure_l2,lambda,gamma,n_failures,n_sampled,loss_total,val_loss\n";
  for (const auto& r : steps) {
    out << r.t << ',' << r.epoch << ',' << format_double(r.loss_base) << ',' << format_double(r.loss_fail) << ','
        << format_double(r.failure_l2) << ',' << format_double(r.lambda) << ',' << format_double(r.gamma) << ','
        << r.n_failures << ',' << r.n_sampled << ',' << format_double(r.loss_total) << ','
        << (r.val_loss ? format_double(*r.val_loss) : std::string{}) << '\n';
  }
}

void TrainHistory::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_csv(out);
}

std::vector<double> TrainHistory::val_losses() const {
  std::vector<double> out;
  for (const auto& r : steps)
    if (r.val_loss) out.push_back(*r.val_loss);
  return out;
}

void optimizer_step(std::span<double> params, std::span<const double> grad, OptimizerState& state,
                    const OptimizerSettings& s) {
  if (params.size() != grad.size()) throw std::invalid_argument("optimizer_step: shape mismatch");
  for (double g : grad)
    if (!std::isfinite(g)) throw DivergenceError("optimizer_step: non-finite gradient");
  if (s.kind == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= s.learning_rate * grad[i];
    ++state.t;
    return;
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("optimizer_step: state shape mismatch");
  ++state.t;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = s.beta1 * state.m[i] + (1.0 - s.beta1) * grad[i];
    state.v[i] = s.beta2 * state.v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.eps);
  }
}

namespace {

// Improvement of at least min_delta resets the patience counter.
bool improves(double value, double best, double min_delta) { return value <= best - min_delta; }

}  // namespace

bool early_stop(std::span<const double> val_losses, std::size_t patience, double min_delta) {
  if (patience < 1) throw std::invalid_argument("early_stop: patience must be at least 1");
  double best = std::numeric_limits<double>::infinity();
  std::size_t bad = 0;
  for (double v : val_losses) {
    if (improves(v, best, min_delta)) {
      best = v;
      bad = 0;
    } else {
      ++bad;
    }
  }
  return bad >= patience;
}

// ---------------------------------------------------------------------------

namespace {

enum Stream : std::uint64_t { kValStream = 0xA11DULL, kEpochStream = 0xE90C0000ULL };

struct Shards {
  std::vector<PreferencePair> train;
  std::vector<PreferencePair> val;
};

Shards make_shards(const Dataset& ds, const TrainConfig& cfg) {
  Shards s;
  const std::size_t n = ds.pairs.size();
  std::size_t n_val = 0;
  if (cfg.early_stop_patience > 0 && cfg.mode != TrainMode::fa_self_supervised)
    n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(n)));
  if (n_val == 0 || n_val >= n) {
    s.train = ds.pairs;
    return s;
  }
  Rng rng(cfg.seed, kValStream);
  const auto order = rng.permutation(n);
  std::vector<bool> is_val(n, false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
  for (std::size_t i = 0; i < n; ++i) (is_val[i] ? s.val : s.train).push_back(ds.pairs[i]);
  return s;
}

std::string diagnostics(const StepRecord& r) {
  std::ostringstream os;
  os << "non-finite loss at step " << r.t << " (epoch " << r.epoch << "): L_base=" << r.loss_base
     << " L_fail=" << r.loss_fail << " ||w_F||^2=" << r.failure_l2 << " lambda=" << r.lambda
     << " |F_t|=" << r.n_failures << " |S_t|=" << r.n_sampled;
  return os.str();
}

}  // namespace

TrainResult train(const Dataset& dataset, const TrainConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  if (dataset.pairs.empty()) throw std::invalid_argument("train: dataset has no pairs");
  dataset.validate();
  const EmbeddingMatrix& emb = *dataset.embeddings;

  const Shards shards = make_shards(dataset, cfg);
  const std::size_t n_train = shards.train.size();
  const std::size_t steps_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t planned_epochs = cfg.planned_epochs();
  const std::size_t total_steps = planned_epochs * steps_per_epoch;
  const std::size_t epochs_per_round = cfg.resolved_epochs_per_round();
  const bool fa = cfg.mode != TrainMode::baseline;

  TrainResult result;
  OptimizerState opt;
  TrainerState& st = result.state;
  if (options.resume) {
    const Checkpoint& ck = *options.resume;
    if (!ck.state) throw std::invalid_argument("train: resume checkpoint carries no trainer state");
    if (ck.model.dim() != emb.dim() || ck.model.head() != cfg.head)
      throw std::invalid_argument("train: resume checkpoint does not match the dataset or head");
    result.model = ck.model;
    st = *ck.state;
    opt.t = st.adam_t;
    opt.m = st.m;
    opt.v = st.v;
  } else {
    result.model = init_model(emb.dim(), cfg.head, InitConfig{cfg.seed}, cfg.hidden_width);
    if (!fa)
      for (double& w : result.model.path_params(Path::failure)) w = 0.0;
    st.best_val = std::numeric_limits<double>::infinity();
  }
  DualPathRewardModel& model = result.model;

  const OptimizerSettings settings{cfg.optimizer, cfg.learning_rate};
  const std::size_t stop_at = std::min(total_steps, options.max_steps.value_or(total_steps));
  std::vector<double> grad(model.param_count());
  std::vector<std::size_t> perm;
  std::size_t perm_epoch = std::numeric_limits<std::size_t>::max();
  std::vector<PreferencePair> batch;

  auto snapshot = [&]() {
    st.adam_t = opt.t;
    st.m = opt.m;
    st.v = opt.v;
    return Checkpoint{model, to_string(cfg.mode), st};
  };

  for (std::size_t t = st.step; t < stop_at; ++t) {
    const std::size_t epoch = t / steps_per_epoch;
    const std::size_t b = t % steps_per_epoch;
    if (epoch != perm_epoch) {
      perm = Rng(cfg.seed, kEpochStream + epoch).permutation(n_train);
      perm_epoch = epoch;
    }
    batch.clear();
    for (std::size_t i = b * cfg.batch_size; i < std::min(n_train, (b + 1) * cfg.batch_size); ++i)
      batch.push_back(shards.train[perm[i]]);

    const auto deltas = margins(model, batch, emb);
    const ScheduleState sched = schedule_step(cfg.schedule, cfg.objective, t, total_steps);

    IndexSet failures;
    switch (cfg.mode) {
      case TrainMode::baseline:
        break;
      case TrainMode::fa_margin:
      case TrainMode::fa_supervised: {
        if (cfg.schedule.curriculum == Curriculum::threshold) {
          failures = margin_failures(deltas, sched.gamma);
        } else {
          const double frac = fraction_schedule(t, total_steps, cfg.schedule.fail_frac_start, cfg.schedule.fail_frac_end);
          failures = bottom_k(deltas, failure_count(frac, batch.size()));
          std::sort(failures.begin(), failures.end());
        }
        if (cfg.mode == TrainMode::fa_supervised)
          failures = set_union(failures, supervised_failures(model, batch, emb, cfg.schedule.supervised_rule));
        break;
      }
      case TrainMode::fa_self_supervised: {
        const std::size_t rounds = cfg.schedule.rounds;
        const std::size_t round = std::min(rounds - 1, epoch / epochs_per_round);
        const double frac = fraction_schedule(round, rounds - 1, cfg.schedule.fail_frac_start, cfg.schedule.fail_frac_end);
        failures = bottom_k(deltas, failure_count(frac, batch.size()));
        std::sort(failures.begin(), failures.end());
        break;
      }
    }
    const IndexSet sampled = fa ? sample_failures(failures, sched.p, cfg.seed, t) : IndexSet{};
    const double lambda = fa ? sched.lambda : 0.0;

    const LossBreakdown loss =
        combined_loss_and_grad(model, batch, deltas, sampled, lambda, emb, cfg.objective, grad, fa);

    StepRecord rec;
    rec.t = t;
    rec.epoch = epoch;
    rec.loss_base = loss.base;
    rec.loss_fail = loss.fail;
    rec.failure_l2 = loss.l2;
    rec.lambda = lambda;
    rec.gamma = sched.gamma;
    rec.n_failures = failures.size();
    rec.n_sampled = sampled.size();
    rec.loss_total = loss.total;
    if (!std::isfinite(loss.total)) throw DivergenceError(diagnostics(rec));

    optimizer_step(model.params(), grad, opt, settings);
    st.step = t + 1;

    bool stop = false;
    if (b + 1 == steps_per_epoch && !shards.val.empty()) {
      const double val = batch_base_loss(model, shards.val, emb, cfg.objective);
      if (!std::isfinite(val)) throw DivergenceError("non-finite validation loss after epoch " + std::to_string(epoch));
      rec.val_loss = val;
      if (improves(val, st.has_best_val ? st.best_val : std::numeric_limits<double>::infinity(), cfg.min_delta)) {
        st.best_val = val;
        st.has_best_val = true;
        st.bad_evals = 0;
      } else {
        ++st.bad_evals;
      }
      stop = cfg.early_stop_patience > 0 && st.bad_evals >= cfg.early_stop_patience;
    }
    result.history.steps.push_back(rec);

    if (options.checkpoint_every > 0 && options.on_checkpoint && st.step % options.checkpoint_every == 0)
      options.on_checkpoint(snapshot());
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  snapshot();
  return result;
}

TrainResult train_self_supervised(const Dataset& dataset, const TrainConfig& config, const TrainOptions& options) {
  if (config.mode != TrainMode::fa_self_supervised)
    throw std::invalid_argument("train_self_supervised requires mode fa-self-supervised");
  return train(dataset, config, options);
}

}  // namespace fairl
