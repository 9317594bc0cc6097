#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fairl/config.hpp"
#include "fairl/data.hpp"

namespace fairl {

// Each command writes into run.output_dir, including resolved_config.ini,
// and returns the artifacts it wrote after re-reading each one. Wall-clock
// times go to run.log only, so the other files depend on (config, seed) alone.
using Artifacts = std::vector<std::filesystem::path>;

Artifacts cmd_gen(const RunConfig& cfg);
Artifacts cmd_train(const RunConfig& cfg);
Artifacts cmd_eval(const RunConfig& cfg);
Artifacts cmd_geom(const RunConfig& cfg);
Artifacts cmd_sweep(const RunConfig& cfg);
Artifacts cmd_realign(const RunConfig& cfg);
// Aggregates metrics JSON files by method into mean ± std tables.
Artifacts cmd_report(const RunConfig& cfg, const std::vector<std::filesystem::path>& inputs);

// Dataset from data.pairs/data.embeddings when set, else synthetic from the
// data section with the first data.pair_mix value.
struct RunData {
  Dataset dataset;
  std::optional<GroundTruth> ground_truth;
};
RunData load_run_data(const RunConfig& cfg, std::uint64_t seed);
// data.test_fraction = 0 returns the dataset twice.
std::pair<Dataset, Dataset> train_test_split(const RunConfig& cfg, const Dataset& ds, std::uint64_t seed);

// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
int run_cli(int argc, const char* const* argv);

}  // namespace fairl
