#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fairl/data.hpp"
#include "fairl/objectives.hpp"

namespace fairl {

// Linear preference constraints theta^T x_i >= base_margin, with the listed
// failure indices tightened to theta^T x_f >= margin_fail in FA mode.
struct ConstraintSet {
  std::vector<std::vector<double>> directions;
  double base_margin = 0.0;
  std::vector<std::size_t> failure_indices;
  double margin_fail = 0.0;

  std::size_t dim() const { return directions.empty() ? 0 : directions.front().size(); }
  void validate() const;
  bool base_feasible(std::span<const double> theta) const;
  bool fa_feasible(std::span<const double> theta) const;
};

enum class FeasibilityMode { base, fa };
enum class SampleDomain { sphere, ball };

struct SamplingConfig {
  std::size_t n_samples = 100'000;
  std::uint64_t seed = 0;
  double radius = 10.0;
  SampleDomain domain = SampleDomain::sphere;
  bool keep_samples = false;  // cache feasible unit directions
};

struct FeasibilityEstimate {
  double fraction = 0.0;
  std::size_t n_samples = 0;
  std::size_t n_feasible = 0;
  // Unit directions of the feasible draws, in draw order (when requested).
  std::vector<std::vector<double>> samples;
};

// Draw i comes from a counter-based stream keyed by (seed, i / kShardSize),
// so base and fa evaluations with the same seed see identical points.
inline constexpr std::size_t kShardSize = 4096;

// Calls fn(index, point) for every draw; point has norm `radius` on the
// sphere or lies inside the ball.
void for_each_draw(std::size_t dim, const SamplingConfig& cfg,
                   const std::function<void(std::size_t, std::span<const double>)>& fn);

FeasibilityEstimate feasible_fraction(const ConstraintSet& cs, FeasibilityMode mode, const SamplingConfig& cfg);

struct Dispersion {
  double diameter = 0.0;
  double mean_pairwise_distance = 0.0;
  std::size_t n_used = 0;
  bool capped = false;
};

// Pairwise distances over at most `cap` samples (the first ones, which are
// already a uniform subsample of i.i.d. draws). Needs two samples.
inline constexpr std::size_t kDispersionCap = 5000;
Dispersion dispersion(std::span<const std::vector<double>> samples, std::size_t cap = kDispersionCap);

struct SubsetReport {
  bool subset_holds = true;  // every fa-feasible draw is base-feasible
  bool strict = false;       // some base-feasible draw is fa-infeasible
  std::size_t n_samples = 0;
  std::size_t base_count = 0;
  std::size_t fa_count = 0;
  double base_fraction = 0.0;
  double fa_fraction = 0.0;
  // Dispersion over draws up to the cap-th base-feasible one, so the fa
  // subsample stays a subset of the base subsample.
  std::optional<Dispersion> base_dispersion;
  std::optional<Dispersion> fa_dispersion;
  double base_diameter = 0.0;  // 0 for fewer than two points
  double fa_diameter = 0.0;
};

SubsetReport verify_subset(const ConstraintSet& cs, const SamplingConfig& cfg);

struct DominanceReport {
  bool holds = true;
  std::size_t n_params = 0;
  std::size_t strict_count = 0;
  std::size_t nonempty_count = 0;  // draws with at least one failure
  double min_gap = 0.0;            // min over draws of L_FA - L_base
  bool combined_holds = true;      // L_t >= L_base with the lambda-weighted objective
};

// Random linear parameter draws; for each, failures are {i : delta_i <= gamma}
// and L_FA replaces their base terms with failure terms.
DominanceReport loss_dominance_check(const Dataset& dataset, const ObjectiveConfig& cfg, std::size_t n_params,
                                     std::uint64_t seed, double gamma = 0.5, double lambda = 10.0);

// Random instance whose base cone contains a cap around a hidden direction;
// with `supported`, margin_fail exceeds theta0^T x_f at a strictly
// base-feasible point, so strict shrinkage has positive measure.
ConstraintSet random_constraint_set(std::size_t dim, std::size_t n_constraints, std::size_t n_failures,
                                    std::uint64_t seed, double radius = 10.0, bool supported = true);

struct ToyScene {
  ConstraintSet constraints;
  double radius = 10.0;
  std::vector<std::array<double, 2>> points;
  std::vector<bool> base_ok;
  std::vector<bool> fa_ok;
  std::size_t base_count() const;
  std::size_t fa_count() const;
};

// Two cone constraints and one failure constraint in the plane; points are
// uniform in the disk of radius 10.
ToyScene toy_2d_scene(std::uint64_t seed, std::size_t n_points = 2000, bool with_failure = true);

}  // namespace fairl
