#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairl/data.hpp"
#include "fairl/failure_mining.hpp"
#include "fairl/objectives.hpp"
#include "fairl/reward_model.hpp"

namespace fairl {

enum class TrainMode { baseline, fa_supervised, fa_margin, fa_self_supervised };
enum class OptimizerKind { adam, sgd };

std::string to_string(TrainMode m);
TrainMode parse_train_mode(const std::string& s);
std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer_kind(const std::string& s);

struct TrainConfig {
  ObjectiveConfig objective;
  ScheduleConfig schedule;
  HeadKind head = HeadKind::linear;
  std::size_t hidden_width = DualPathRewardModel::kDefaultHidden;
  std::size_t batch_size = 32;
  std::size_t epochs = 800;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  // 0 disables early stopping. One evaluation per epoch.
  std::size_t early_stop_patience = 20;
  double min_delta = 1e-5;
  // Share of the training pairs held out for early stopping.
  double val_fraction = 0.1;
  // Self-supervised mode only; 0 means max(1, epochs / rounds).
  std::size_t epochs_per_round = 0;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::baseline;

  void validate() const;
  std::size_t resolved_epochs_per_round() const;
  // Number of epochs the run is planned for (self-supervised: rounds x epochs_per_round).
  std::size_t planned_epochs() const;
};

struct StepRecord {
  std::size_t t = 0;
  std::size_t epoch = 0;
  double loss_base = 0.0;
  double loss_fail = 0.0;
  double failure_l2 = 0.0;
  double lambda = 0.0;
  double gamma = 0.0;
  std::size_t n_failures = 0;  // |F_t|
  std::size_t n_sampled = 0;   // |S_t|
  double loss_total = 0.0;     // L_t
  std::optional<double> val_loss;  // set on the last step of an epoch when a validation shard exists
};

struct TrainHistory {
  std::vector<StepRecord> steps;

  void write_csv(std::ostream& out) const;
  void write_csv(const std::filesystem::path& path) const;
  std::vector<double> val_losses() const;
};

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  std::uint64_t t = 0;
  std::vector<double> m;
  std::vector<double> v;
};

// In-place update of params. Throws DivergenceError on a non-finite gradient.
void optimizer_step(std::span<double> params, std::span<const double> grad, OptimizerState& state,
                    const OptimizerSettings& settings);

// True when the last `patience` evaluations each failed to improve on the
// running best by at least min_delta.
bool early_stop(std::span<const double> val_losses, std::size_t patience, double min_delta);

struct TrainOptions {
  // Continue from a checkpoint carrying trainer state (same dataset and config).
  std::optional<Checkpoint> resume;
  // Stop after this many optimiser steps in total (including resumed ones).
  std::optional<std::size_t> max_steps;
  // Called every `checkpoint_every` steps with the post-update state.
  std::size_t checkpoint_every = 0;
  std::function<void(const Checkpoint&)> on_checkpoint;
};

struct TrainResult {
  DualPathRewardModel model;
  TrainHistory history;
  TrainerState state;
  bool stopped_early = false;
};

TrainResult train(const Dataset& dataset, const TrainConfig& config, const TrainOptions& options = {});

// Rounds of bottom-k margin mining with a shrinking failure fraction; no labels read.
TrainResult train_self_supervised(const Dataset& dataset, const TrainConfig& config,
                                  const TrainOptions& options = {});

}  // namespace fairl
