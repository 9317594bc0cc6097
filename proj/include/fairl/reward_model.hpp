#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairl/data.hpp"

namespace fairl {

enum class HeadKind { linear, mlp };
enum class Path { base = 0, failure = 1 };

std::string to_string(HeadKind h);
HeadKind parse_head_kind(const std::string& s);

struct PathScores {
  double base = 0.0;
  double failure = 0.0;
  double total() const { return base + failure; }
};

// Kaiming-uniform: every weight and bias of a layer ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)].
struct InitConfig {
  std::uint64_t seed = 0;
};

// R(o) = R_D(o) + R_F(o) over a frozen embedding h(o).
//
// Parameters live in one flat vector, base path first. Per-path layout:
//   linear: [theta (d), b]
//   mlp:    [W1 (hidden x d, row-major), b1 (hidden), w2 (hidden), b2]
// with R_path(h) = w2 . relu(W1 h + b1) + b2 for the MLP head.
class DualPathRewardModel {
public:
  static constexpr std::size_t kDefaultHidden = 64;

  DualPathRewardModel() = default;
  // All parameters zero.
  DualPathRewardModel(std::size_t dim, HeadKind head, std::size_t hidden_width = kDefaultHidden);

  std::size_t dim() const { return dim_; }
  HeadKind head() const { return head_; }
  std::size_t hidden_width() const { return head_ == HeadKind::mlp ? hidden_ : 0; }
  std::size_t path_size() const;
  std::size_t param_count() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<double> path_params(Path p);
  std::span<const double> path_params(Path p) const;
  std::size_t path_offset(Path p) const { return p == Path::base ? 0 : path_size(); }

  // Linear head only: theta and bias of a path.
  std::span<double> theta(Path p);
  std::span<const double> theta(Path p) const;
  double& bias(Path p);
  double bias(Path p) const;

  // Whether flat index i is a weight (as opposed to a bias) of the failure path.
  bool is_failure_weight(std::size_t i) const;

  double path_score(Path p, std::span<const float> h) const;
  PathScores score_paths(std::span<const float> h) const;
  double score(std::span<const float> h) const { return score_paths(h).total(); }

  // grad += weight * d score(h) / d params. Only the listed paths are touched.
  void add_score_gradient(std::span<const float> h, double weight, std::span<double> grad,
                          bool include_failure_path = true) const;

  friend bool operator==(const DualPathRewardModel&, const DualPathRewardModel&) = default;

private:
  void check_dim(std::span<const float> h) const;
  void add_path_gradient(Path p, std::span<const float> h, double weight, std::span<double> grad) const;

  std::size_t dim_ = 0;
  HeadKind head_ = HeadKind::linear;
  std::size_t hidden_ = kDefaultHidden;
  std::vector<double> params_;
};

DualPathRewardModel init_model(std::size_t dim, HeadKind head, const InitConfig& init,
                               std::size_t hidden_width = DualPathRewardModel::kDefaultHidden);

// Delta = R(o+) - R(o-).
double margin(const DualPathRewardModel& model, const PreferencePair& pair, const EmbeddingMatrix& emb);
std::vector<double> margins(const DualPathRewardModel& model, std::span<const PreferencePair> pairs,
                            const EmbeddingMatrix& emb);

// Squared L2 norm of the failure-path weights; failure-path biases are excluded.
double failure_path_l2(const DualPathRewardModel& model);

std::vector<double> score_rows(const DualPathRewardModel& model, const EmbeddingMatrix& emb,
                               std::span<const std::size_t> rows);

// Optimiser state carried in a checkpoint so training can resume exactly.
struct TrainerState {
  std::uint64_t step = 0;
  std::uint64_t adam_t = 0;
  std::vector<double> m;
  std::vector<double> v;
  double best_val = 0.0;
  bool has_best_val = false;
  std::uint64_t bad_evals = 0;
  friend bool operator==(const TrainerState&, const TrainerState&) = default;
};

// JSON checkpoint. Every f64 is written as a shortest round-trip decimal
// string, so load(save(m)) is bit-exact:
//   {"format": "fairl-checkpoint", "version": 1, "dim": d, "head_kind": "linear"|"mlp",
//    "hidden_width": h, "mode": "...",
//    "paths": {"base": {...}, "failure": {...}},
//    "trainer_state": {...}}           (optional)
// linear paths hold {"theta": [d], "bias": s}; mlp paths hold
// {"w1": [h*d], "b1": [h], "w2": [h], "b2": s}.
struct Checkpoint {
  DualPathRewardModel model;
  std::string mode;  // training mode that produced the model, may be empty
  std::optional<TrainerState> state;
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text, const std::string& source = "<checkpoint>");
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string format_double(double v);
double parse_double(const std::string& s);

}  // namespace fairl
