#include "fairl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fairl/failure_mining.hpp"
#include "fairl/rng.hpp"

namespace fairl {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace

void ConstraintSet::validate() const {
  if (directions.empty()) throw std::invalid_argument("constraint set is empty");
  const std::size_t d = dim();
  if (d == 0) throw std::invalid_argument("constraint directions must be non-empty vectors");
  for (const auto& x : directions) {
    if (x.size() != d) throw std::invalid_argument("constraint directions differ in dimension");
    if (norm(x) == 0.0) throw std::invalid_argument("constraint direction is zero");
  }
  for (std::size_t f : failure_indices)
    if (f >= directions.size()) throw std::invalid_argument("failure index out of range");
  if (!failure_indices.empty() && !(margin_fail > base_margin))
    throw std::invalid_argument("margin_fail must exceed base_margin");
}

bool ConstraintSet::base_feasible(std::span<const double> theta) const {
  return std::all_of(directions.begin(), directions.end(), [&](const auto& x) { return dot(theta, x) >= base_margin; });
}

bool ConstraintSet::fa_feasible(std::span<const double> theta) const {
  if (!base_feasible(theta)) return false;
  return std::all_of(failure_indices.begin(), failure_indices.end(),
                     [&](std::size_t f) { return dot(theta, directions[f]) >= margin_fail; });
}

void for_each_draw(std::size_t dim, const SamplingConfig& cfg,
                   const std::function<void(std::size_t, std::span<const double>)>& fn) {
  if (cfg.n_samples < 1) throw std::invalid_argument("n_samples must be at least 1");
  if (!(cfg.radius > 0.0)) throw std::invalid_argument("sampling radius must be positive");
  std::vector<double> p(dim);
  for (std::size_t shard = 0; shard * kShardSize < cfg.n_samples; ++shard) {
    Rng rng(cfg.seed, 0x6E0000ULL + shard);
    const std::size_t end = std::min(cfg.n_samples, (shard + 1) * kShardSize);
    for (std::size_t i = shard * kShardSize; i < end; ++i) {
      double nrm = 0.0;
      while (nrm == 0.0) {
        rng.fill_normal(p);
        nrm = norm(p);
      }
      double scale = cfg.radius / nrm;
      if (cfg.domain == SampleDomain::ball) scale *= std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
      for (double& v : p) v *= scale;
      fn(i, p);
    }
  }
}

namespace {

std::vector<double> unit(std::span<const double> p) {
  const double n = norm(p);
  std::vector<double> u(p.begin(), p.end());
  if (n > 0.0)
    for (double& v : u) v /= n;
  return u;
}

}  // namespace

FeasibilityEstimate feasible_fraction(const ConstraintSet& cs, FeasibilityMode mode, const SamplingConfig& cfg) {
  cs.validate();
  FeasibilityEstimate est;
  est.n_samples = cfg.n_samples;
  for_each_draw(cs.dim(), cfg, [&](std::size_t, std::span<const double> p) {
    const bool ok = mode == FeasibilityMode::base ? cs.base_feasible(p) : cs.fa_feasible(p);
    if (!ok) return;
    ++est.n_feasible;
    if (cfg.keep_samples) est.samples.push_back(unit(p));
  });
  est.fraction = static_cast<double>(est.n_feasible) / static_cast<double>(est.n_samples);
  return est;
}

Dispersion dispersion(std::span<const std::vector<double>> samples, std::size_t cap) {
  if (samples.size() < 2) throw std::invalid_argument("dispersion needs at least two samples");
  Dispersion d;
  d.n_used = std::min(samples.size(), std::max<std::size_t>(cap, 2));
  d.capped = d.n_used < samples.size();
  double max_d = 0.0;
  long double sum = 0.0L;
  for (std::size_t i = 0; i < d.n_used; ++i) {
    const auto& a = samples[i];
    for (std::size_t j = i + 1; j < d.n_used; ++j) {
      const auto& b = samples[j];
      double s = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = a[k] - b[k];
        s += diff * diff;
      }
      const double dist = std::sqrt(s);
      max_d = std::max(max_d, dist);
      sum += dist;
    }
  }
  const double n_pairs = static_cast<double>(d.n_used) * static_cast<double>(d.n_used - 1) / 2.0;
  d.diameter = max_d;
  d.mean_pairwise_distance = static_cast<double>(sum / n_pairs);
  return d;
}

SubsetReport verify_subset(const ConstraintSet& cs, const SamplingConfig& cfg) {
  cs.validate();
  SubsetReport rep;
  rep.n_samples = cfg.n_samples;
  std::vector<std::vector<double>> base_pts, fa_pts;
  std::size_t window_end = std::numeric_limits<std::size_t>::max();
  for_each_draw(cs.dim(), cfg, [&](std::size_t i, std::span<const double> p) {
    const bool base = cs.base_feasible(p);
    const bool fa = cs.fa_feasible(p);
    rep.base_count += base;
    rep.fa_count += fa;
    if (fa && !base) rep.subset_holds = false;
    if (base && !fa) rep.strict = true;
    if (i >= window_end) return;
    if (base) {
      base_pts.push_back(unit(p));
      if (base_pts.size() == kDispersionCap) window_end = i + 1;
    }
    if (fa) fa_pts.push_back(unit(p));
  });
  const double n = static_cast<double>(cfg.n_samples);
  rep.base_fraction = static_cast<double>(rep.base_count) / n;
  rep.fa_fraction = static_cast<double>(rep.fa_count) / n;
  if (base_pts.size() >= 2) {
    rep.base_dispersion = dispersion(base_pts);
    rep.base_diameter = rep.base_dispersion->diameter;
  }
  if (fa_pts.size() >= 2) {
    rep.fa_dispersion = dispersion(fa_pts);
    rep.fa_diameter = rep.fa_dispersion->diameter;
  }
  return rep;
}

DominanceReport loss_dominance_check(const Dataset& dataset, const ObjectiveConfig& cfg, std::size_t n_params,
                                     std::uint64_t seed, double gamma, double lambda) {
  cfg.validate(/*allow_degenerate=*/true);
  if (n_params < 1) throw std::invalid_argument("n_params must be at least 1");
  if (dataset.pairs.empty()) throw std::invalid_argument("loss_dominance_check: empty dataset");
  dataset.validate();
  const auto& emb = *dataset.embeddings;
  const std::size_t d = emb.dim();

  // Pair difference vectors; the linear margin is theta^T x with theta = theta_D + theta_F.
  std::vector<std::vector<double>> x(dataset.pairs.size(), std::vector<double>(d));
  for (std::size_t i = 0; i < dataset.pairs.size(); ++i) {
    const auto a = emb.row(dataset.pairs[i].pos);
    const auto b = emb.row(dataset.pairs[i].neg);
    for (std::size_t j = 0; j < d; ++j) x[i][j] = static_cast<double>(a[j]) - static_cast<double>(b[j]);
  }

  DominanceReport rep;
  rep.n_params = n_params;
  rep.min_gap = std::numeric_limits<double>::infinity();
  DualPathRewardModel model(d, HeadKind::linear);
  std::vector<double> deltas(x.size()), base_terms(x.size()), fa_terms(x.size());
  for (std::size_t k = 0; k < n_params; ++k) {
    Rng rng(seed, 0xD0000ULL + k);
    const double scale = std::exp(rng.uniform(std::log(0.05), std::log(5.0)));
    for (double& w : model.params()) w = scale * rng.normal();
    const auto th_d = model.theta(Path::base);
    const auto th_f = model.theta(Path::failure);
    for (std::size_t i = 0; i < x.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += (th_d[j] + th_f[j]) * x[i][j];
      deltas[i] = s;
    }
    const IndexSet failures = margin_failures(deltas, gamma);
    std::vector<bool> is_fail(x.size(), false);
    for (std::size_t f : failures) is_fail[f] = true;
    for (std::size_t i = 0; i < x.size(); ++i) {
      base_terms[i] = base_pair_loss(deltas[i], cfg);
      fa_terms[i] = is_fail[i] ? fail_pair_loss(deltas[i], cfg) : base_terms[i];
    }
    const double n = static_cast<double>(x.size());
    const double l_base = pairwise_sum(base_terms) / n;
    const double l_fa = pairwise_sum(fa_terms) / n;
    const double gap = l_fa - l_base;
    rep.min_gap = std::min(rep.min_gap, gap);
    if (gap < -1e-9) rep.holds = false;
    if (gap > 0.0) ++rep.strict_count;
    if (!failures.empty()) ++rep.nonempty_count;

    // Combined objective with the failure subset as S_t.
    std::vector<double> fail_only;
    for (std::size_t f : failures) fail_only.push_back(fail_pair_loss(deltas[f], cfg));
    const double l_fail = fail_only.empty() ? 0.0 : pairwise_sum(fail_only) / static_cast<double>(fail_only.size());
    const double l_t = l_base + lambda * l_fail + 0.5 * lambda * failure_path_l2(model);
    if (l_t < l_base - 1e-9) rep.combined_holds = false;
  }
  return rep;
}

ConstraintSet random_constraint_set(std::size_t dim, std::size_t n_constraints, std::size_t n_failures,
                                    std::uint64_t seed, double radius, bool supported) {
  if (dim < 1 || n_constraints < 1) throw std::invalid_argument("random_constraint_set: empty instance");
  if (n_failures > n_constraints) throw std::invalid_argument("random_constraint_set: too many failures");
  Rng rng(seed, 0xC0AEULL);
  std::vector<double> theta0(dim);
  double n0 = 0.0;
  while (n0 == 0.0) {
    rng.fill_normal(theta0);
    n0 = norm(theta0);
  }
  for (double& v : theta0) v /= n0;

  ConstraintSet cs;
  cs.base_margin = 0.5;
  // Every direction makes an angle of at most acos(0.2) with theta0, so the
  // point radius * theta0 satisfies each base constraint with slack.
  for (std::size_t i = 0; i < n_constraints; ++i) {
    std::vector<double> xi(dim);
    for (;;) {
      rng.fill_normal(xi);
      double c = dot(xi, theta0);
      if (c < 0.0) {
        for (double& v : xi) v = -v;
        c = -c;
      }
      const double nx = norm(xi);
      if (nx > 0.0 && c >= 0.2 * nx && radius * c > cs.base_margin + 1.0) break;
    }
    cs.directions.push_back(std::move(xi));
  }
  for (std::size_t f = 0; f < n_failures; ++f) cs.failure_indices.push_back(f);
  if (n_failures > 0) {
    const auto& xf = cs.directions[0];
    const double at_anchor = radius * dot(xf, theta0);
    // supported: the anchor radius * theta0 is base-feasible but violates the
    // failure margin. Otherwise the tightening is marginal and strictness is
    // left to chance.
    cs.margin_fail = supported ? at_anchor + 1.0 : cs.base_margin + 1e-3;
  }
  cs.validate();
  return cs;
}

std::size_t ToyScene::base_count() const { return static_cast<std::size_t>(std::count(base_ok.begin(), base_ok.end(), true)); }
std::size_t ToyScene::fa_count() const { return static_cast<std::size_t>(std::count(fa_ok.begin(), fa_ok.end(), true)); }

ToyScene toy_2d_scene(std::uint64_t seed, std::size_t n_points, bool with_failure) {
  ToyScene scene;
  scene.radius = 10.0;
  auto& cs = scene.constraints;
  // A wide cone bounded by two preference constraints through the origin.
  cs.directions = {{1.0, 0.25}, {0.25, 1.0}};
  cs.base_margin = 0.0;
  if (with_failure) {
    // Failure pair d_f with margin M: prunes the low-margin tip of the cone.
    cs.directions.push_back({std::sqrt(0.5), std::sqrt(0.5)});
    cs.failure_indices = {2};
    cs.margin_fail = 4.0;
  }
  cs.validate();
  SamplingConfig cfg;
  cfg.n_samples = n_points;
  cfg.seed = seed;
  cfg.radius = scene.radius;
  cfg.domain = SampleDomain::ball;
  for_each_draw(2, cfg, [&](std::size_t, std::span<const double> p) {
    scene.points.push_back({p[0], p[1]});
    scene.base_ok.push_back(cs.base_feasible(p));
    scene.fa_ok.push_back(cs.fa_feasible(p));
  });
  return scene;
}

}  // namespace fairl
