#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fairl {

// Row-major n x d matrix of frozen f32 features h(o).
class EmbeddingMatrix {
public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t dim, std::size_t count);
  EmbeddingMatrix(std::size_t dim, std::vector<float> data);

  std::size_t dim() const { return dim_; }
  std::size_t count() const { return dim_ == 0 ? 0 : data_.size() / dim_; }

  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<float> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  const std::vector<float>& data() const { return data_; }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

private:
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

using Label = std::int8_t;  // -1 (toxic / failing) or +1

struct PreferencePair {
  std::size_t pos = 0;
  std::size_t neg = 0;
  std::optional<Label> pos_label;
  std::optional<Label> neg_label;
  std::optional<std::string> subtype;

  bool labeled() const { return pos_label.has_value() && neg_label.has_value(); }
  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

struct Dataset {
  std::shared_ptr<const EmbeddingMatrix> embeddings;
  std::vector<PreferencePair> pairs;
  std::map<std::string, std::string> provenance;

  std::size_t dim() const { return embeddings ? embeddings->dim() : 0; }
  std::size_t size() const { return pairs.size(); }
  // Throws std::invalid_argument on any bad index, self-pair or label.
  void validate() const;
};

// Linear ground-truth reward R*(o) = theta*^T h(o) + b*, with labels
// y(o) = +1 iff R*(o) - label_threshold >= 0.
struct GroundTruth {
  std::vector<double> theta_star;
  double bias_star = 0.0;
  double label_threshold = 0.0;

  double score(std::span<const float> h) const;
  Label label(std::span<const float> h) const;
};

struct SyntheticConfig {
  std::size_t dim = 8;
  std::size_t n_pairs = 1000;
  double pair_mix = 0.5;  // fraction of T->NT pairs
  double noise = 0.0;     // Bradley-Terry temperature; 0 means noiseless
  double bias_star = 0.0;
  double label_threshold = 0.0;
  std::uint64_t seed = 0;
};

struct MixStats {
  std::size_t t_to_nt = 0;
  std::size_t nt_to_nt = 0;
  std::size_t nt_to_t = 0;
  std::size_t t_to_t = 0;
  std::size_t unlabeled = 0;

  std::size_t total() const { return t_to_nt + nt_to_nt + nt_to_t + t_to_t + unlabeled; }
};

// FAEM binary: "FAEM", u32 version (1), u32 d, u64 n, n*d little-endian f32.
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m);

// JSON-lines pair records. Indices are not range-checked here.
std::vector<PreferencePair> read_pairs(const std::filesystem::path& path);
void write_pairs(const std::filesystem::path& path, std::span<const PreferencePair> pairs);

Dataset load_dataset(const std::filesystem::path& pairs_path,
                     const std::filesystem::path& embeddings_path);
void save_dataset(const Dataset& ds, const std::filesystem::path& pairs_path,
                  const std::filesystem::path& embeddings_path);

GroundTruth read_ground_truth(const std::filesystem::path& path);
void write_ground_truth(const std::filesystem::path& path, const GroundTruth& gt);

class Rng;

// Isotropic Gaussian row (rounded to f32) conditioned on its ground-truth
// label by rejection, so the conditional law is exact.
void draw_labeled_row(Rng& rng, const GroundTruth& gt, Label want, std::span<float> out);

// Pair i occupies rows 2i (pos) and 2i+1 (neg). T->NT pairs are placed at
// positions chosen by a seeded shuffle; the count is round(pair_mix * n_pairs).
std::pair<Dataset, GroundTruth> gen_synthetic(const SyntheticConfig& cfg);

// Disjoint partition of the pairs; both sides keep the original pair order
// and share the embedding matrix. Needs at least two pairs.
std::pair<Dataset, Dataset> split(const Dataset& ds, double test_fraction, std::uint64_t seed);

MixStats pair_mix_stats(const Dataset& ds);

// Labeled evaluation view over the distinct rows referenced by `pairs`,
// in first-appearance order. Rows lacking a label are skipped.
struct LabeledRows {
  std::vector<std::size_t> rows;
  std::vector<Label> labels;
};
LabeledRows labeled_rows(std::span<const PreferencePair> pairs);

// Distinct rows referenced by `pairs`, first-appearance order.
std::vector<std::size_t> referenced_rows(std::span<const PreferencePair> pairs);

}  // namespace fairl
