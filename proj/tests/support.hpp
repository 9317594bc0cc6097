#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "fairl/data.hpp"
#include "fairl/failure_mining.hpp"
#include "fairl/objectives.hpp"
#include "fairl/reward_model.hpp"

namespace fairl::testing {

// Dataset from explicit rows; pair i is (rows 2i, 2i+1) unless given.
inline Dataset make_dataset(std::size_t dim, const std::vector<std::vector<float>>& rows,
                            std::vector<PreferencePair> pairs = {}) {
  std::vector<float> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  Dataset ds;
  ds.embeddings = std::make_shared<EmbeddingMatrix>(dim, std::move(flat));
  if (pairs.empty())
    for (std::size_t i = 0; i + 1 < rows.size(); i += 2) pairs.push_back({i, i + 1, std::nullopt, std::nullopt, std::nullopt});
  ds.pairs = std::move(pairs);
  return ds;
}

// Distance from the nearest hinge or relu kink. Central differences with a
// step below this value see a smooth function.
inline double kink_distance(const DualPathRewardModel& m, const Dataset& ds, const ObjectiveConfig& cfg,
                            const IndexSet& failures) {
  double dist = std::numeric_limits<double>::infinity();
  const auto deltas = margins(m, ds.pairs, *ds.embeddings);
  if (cfg.kind == ObjectiveKind::max_margin) {
    for (double d : deltas) dist = std::min(dist, std::abs(d - cfg.margin));
    for (std::size_t i : failures) dist = std::min(dist, std::abs(deltas[i] - cfg.margin_fail));
  }
  if (m.head() == HeadKind::mlp) {
    const std::size_t d = m.dim(), h = m.hidden_width();
    for (Path p : {Path::base, Path::failure}) {
      const auto w = m.path_params(p);
      for (std::size_t r = 0; r < ds.embeddings->count(); ++r) {
        const auto x = ds.embeddings->row(r);
        for (std::size_t u = 0; u < h; ++u) {
          double z = w[h * d + u];
          for (std::size_t k = 0; k < d; ++k) z += w[u * d + k] * x[k];
          dist = std::min(dist, std::abs(z));
        }
      }
    }
  }
  return dist;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("fairl_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

}  // namespace fairl::testing
