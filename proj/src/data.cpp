#include "fairl/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "fairl/error.hpp"
#include "fairl/rng.hpp"
#include "json.hpp"

namespace fairl {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim, std::size_t count)
    : dim_(dim), data_(dim * count, 0.0f) {}

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim, std::vector<float> data)
    : dim_(dim), data_(std::move(data)) {
  if (dim_ == 0) throw std::invalid_argument("embedding dimension must be positive");
  if (data_.size() % dim_ != 0)
    throw std::invalid_argument("embedding data size is not a multiple of the dimension");
}

void Dataset::validate() const {
  if (!embeddings) throw std::invalid_argument("dataset has no embedding matrix");
  const std::size_t n = embeddings->count();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.pos >= n || p.neg >= n)
      throw std::invalid_argument("pair " + std::to_string(i) + ": index out of range (rows=" +
                                  std::to_string(n) + ", pos=" + std::to_string(p.pos) +
                                  ", neg=" + std::to_string(p.neg) + ")");
    if (p.pos == p.neg)
      throw std::invalid_argument("pair " + std::to_string(i) + ": pos equals neg");
    for (const auto& l : {p.pos_label, p.neg_label})
      if (l && *l != 1 && *l != -1)
        throw std::invalid_argument("pair " + std::to_string(i) + ": label must be -1 or +1");
  }
}

double GroundTruth::score(std::span<const float> h) const {
  if (h.size() != theta_star.size()) throw std::invalid_argument("ground truth: dimension mismatch");
  double s = bias_star;
  for (std::size_t j = 0; j < h.size(); ++j) s += theta_star[j] * static_cast<double>(h[j]);
  return s;
}

Label GroundTruth::label(std::span<const float> h) const {
  return score(h) - label_threshold >= 0.0 ? Label{1} : Label{-1};
}

// ---------------------------------------------------------------------------
// FAEM binary format

namespace {

constexpr char kMagic[4] = {'F', 'A', 'E', 'M'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 8;

template <typename T>
T load_le(const unsigned char* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

template <typename T>
void store_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  const std::string file = path.string();
  const std::string bytes = slurp(path);
  if (bytes.size() < kHeaderBytes)
    throw FormatError(file, "header", "truncated header (" + std::to_string(bytes.size()) + " bytes)");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (!std::equal(kMagic, kMagic + 4, bytes.begin()))
    throw FormatError(file, "header", "bad magic, expected \"FAEM\"");
  const auto version = load_le<std::uint32_t>(p + 4);
  if (version != kVersion)
    throw FormatError(file, "header", "unsupported version " + std::to_string(version));
  const auto d = load_le<std::uint32_t>(p + 8);
  const auto n = load_le<std::uint64_t>(p + 12);
  if (d == 0) throw FormatError(file, "header", "dimension must be positive");

  const std::size_t payload = bytes.size() - kHeaderBytes;
  if (payload % 4 != 0)
    throw FormatError(file, "payload", "size " + std::to_string(payload) + " is not a whole number of f32 values");
  const std::size_t values = payload / 4;
  if (values % d != 0 || values / d != n) {
    const std::size_t full_rows = values / d;
    const std::size_t tail = values % d;
    std::string where = "row " + std::to_string(full_rows);
    std::string what = "dimension mismatch: header declares d=" + std::to_string(d) + ", n=" +
                       std::to_string(n) + " but payload holds " + std::to_string(values) + " values";
    if (tail != 0) what += " (last row has " + std::to_string(tail) + " entries)";
    throw FormatError(file, where, what);
  }

  std::vector<float> data(values);
  const unsigned char* q = p + kHeaderBytes;
  for (std::size_t i = 0; i < values; ++i) {
    const float v = std::bit_cast<float>(load_le<std::uint32_t>(q + 4 * i));
    if (!std::isfinite(v))
      throw FormatError(file, "row " + std::to_string(i / d) + ", column " + std::to_string(i % d),
                        "non-finite value");
    data[i] = v;
  }
  return EmbeddingMatrix(d, std::move(data));
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  std::string out;
  out.reserve(kHeaderBytes + 4 * m.data().size());
  out.append(kMagic, 4);
  store_le<std::uint32_t>(out, kVersion);
  store_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim()));
  store_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.count()));
  for (float v : m.data()) store_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

// ---------------------------------------------------------------------------
// JSON-lines pairs

namespace {

std::optional<Label> parse_label(const json& obj, const char* key, const std::string& file,
                                 const std::string& where) {
  if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
  const auto& v = obj[key];
  if (!v.is_number_integer() || (v.get<long long>() != 1 && v.get<long long>() != -1))
    throw FormatError(file, where, std::string(key) + " must be -1, 1 or null");
  return static_cast<Label>(v.get<long long>());
}

std::size_t parse_index(const json& obj, const char* key, const std::string& file,
                        const std::string& where) {
  if (!obj.contains(key)) throw FormatError(file, where, std::string("missing \"") + key + "\"");
  const auto& v = obj[key];
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw FormatError(file, where, std::string(key) + " must be a non-negative integer");
  return static_cast<std::size_t>(v.get<long long>());
}

}  // namespace

std::vector<PreferencePair> read_pairs(const std::filesystem::path& path) {
  const std::string file = path.string();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + file);
  std::vector<PreferencePair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(lineno);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(file, where, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw FormatError(file, where, "expected a JSON object");
    for (const auto& [key, _] : obj.items())
      if (key != "pos" && key != "neg" && key != "pos_label" && key != "neg_label" && key != "subtype")
        throw FormatError(file, where, "unknown key \"" + key + "\"");
    PreferencePair p;
    p.pos = parse_index(obj, "pos", file, where);
    p.neg = parse_index(obj, "neg", file, where);
    p.pos_label = parse_label(obj, "pos_label", file, where);
    p.neg_label = parse_label(obj, "neg_label", file, where);
    if (obj.contains("subtype") && !obj["subtype"].is_null()) {
      if (!obj["subtype"].is_string()) throw FormatError(file, where, "subtype must be a string or null");
      p.subtype = obj["subtype"].get<std::string>();
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void write_pairs(const std::filesystem::path& path, std::span<const PreferencePair> pairs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  auto label = [](const std::optional<Label>& l) { return l ? ordered_json(int{*l}) : ordered_json(nullptr); };
  for (const auto& p : pairs) {
    ordered_json obj;
    obj["pos"] = p.pos;
    obj["neg"] = p.neg;
    obj["pos_label"] = label(p.pos_label);
    obj["neg_label"] = label(p.neg_label);
    obj["subtype"] = p.subtype ? ordered_json(*p.subtype) : ordered_json(nullptr);
    out << obj.dump() << '\n';
  }
}

Dataset load_dataset(const std::filesystem::path& pairs_path,
                     const std::filesystem::path& embeddings_path) {
  Dataset ds;
  ds.embeddings = std::make_shared<const EmbeddingMatrix>(read_embeddings(embeddings_path));
  ds.pairs = read_pairs(pairs_path);
  const std::size_t n = ds.embeddings->count();
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    const auto& p = ds.pairs[i];
    if (p.pos >= n || p.neg >= n)
      throw FormatError(pairs_path.string(), "pair " + std::to_string(i),
                        "index out of range (pos=" + std::to_string(p.pos) + ", neg=" +
                            std::to_string(p.neg) + ", rows=" + std::to_string(n) + ")");
    if (p.pos == p.neg) throw FormatError(pairs_path.string(), "pair " + std::to_string(i), "pos equals neg");
  }
  ds.provenance["pairs"] = pairs_path.string();
  ds.provenance["embeddings"] = embeddings_path.string();
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& pairs_path,
                  const std::filesystem::path& embeddings_path) {
  ds.validate();
  write_embeddings(embeddings_path, *ds.embeddings);
  write_pairs(pairs_path, ds.pairs);
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string(), "document", e.what());
  }
  GroundTruth gt;
  gt.theta_star = j.at("theta_star").get<std::vector<double>>();
  gt.bias_star = j.value("bias_star", 0.0);
  gt.label_threshold = j.value("label_threshold", 0.0);
  if (std::all_of(gt.theta_star.begin(), gt.theta_star.end(), [](double v) { return v == 0.0; }))
    throw FormatError(path.string(), "theta_star", "must have a nonzero entry");
  return gt;
}

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& gt) {
  ordered_json j;
  j["theta_star"] = gt.theta_star;
  j["bias_star"] = gt.bias_star;
  j["label_threshold"] = gt.label_threshold;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic environments

namespace {

enum Stream : std::uint64_t { kThetaStream = 0, kMixStream = 1, kPairStreamBase = 16 };

}  // namespace

void draw_labeled_row(Rng& rng, const GroundTruth& gt, Label want, std::span<float> out) {
  for (int attempt = 0; attempt < 1'000'000; ++attempt) {
    for (float& v : out) v = static_cast<float>(rng.normal());
    if (gt.label(out) == want) return;
  }
  throw std::runtime_error("label region has negligible mass; check label_threshold");
}

std::pair<Dataset, GroundTruth> gen_synthetic(const SyntheticConfig& cfg) {
  if (!(cfg.pair_mix >= 0.0 && cfg.pair_mix <= 1.0))
    throw std::invalid_argument("pair_mix must lie in [0, 1]");
  if (cfg.dim < 2) throw std::invalid_argument("synthetic dimension must be at least 2");
  if (cfg.n_pairs < 1) throw std::invalid_argument("n_pairs must be at least 1");
  if (!(cfg.noise >= 0.0) || !std::isfinite(cfg.noise)) throw std::invalid_argument("noise must be finite and non-negative");

  GroundTruth gt;
  gt.bias_star = cfg.bias_star;
  gt.label_threshold = cfg.label_threshold;
  {
    Rng rng(cfg.seed, kThetaStream);
    gt.theta_star.resize(cfg.dim);
    double norm = 0.0;
    while (norm == 0.0) {
      rng.fill_normal(gt.theta_star);
      norm = std::sqrt(std::inner_product(gt.theta_star.begin(), gt.theta_star.end(), gt.theta_star.begin(), 0.0));
    }
    for (double& v : gt.theta_star) v /= norm;
  }

  const auto n_cross = static_cast<std::size_t>(std::llround(cfg.pair_mix * static_cast<double>(cfg.n_pairs)));
  std::vector<bool> cross(cfg.n_pairs, false);
  {
    Rng rng(cfg.seed, kMixStream);
    const auto order = rng.permutation(cfg.n_pairs);
    for (std::size_t i = 0; i < n_cross; ++i) cross[order[i]] = true;
  }

  auto emb = std::make_shared<EmbeddingMatrix>(cfg.dim, 2 * cfg.n_pairs);
  Dataset ds;
  ds.pairs.resize(cfg.n_pairs);
  std::vector<float> a(cfg.dim), b(cfg.dim);
  for (std::size_t i = 0; i < cfg.n_pairs; ++i) {
    Rng rng(cfg.seed, kPairStreamBase + i);
    // a is always non-toxic; b is toxic for T->NT pairs.
    draw_labeled_row(rng, gt, Label{1}, a);
    draw_labeled_row(rng, gt, cross[i] ? Label{-1} : Label{1}, b);
    const double ra = gt.score(a);
    const double rb = gt.score(b);
    bool a_preferred;
    if (cfg.noise == 0.0) {
      a_preferred = ra >= rb;
    } else {
      const double p = 1.0 / (1.0 + std::exp(-(ra - rb) / cfg.noise));
      a_preferred = rng.uniform() < p;
    }
    const auto& pos = a_preferred ? a : b;
    const auto& neg = a_preferred ? b : a;
    std::copy(pos.begin(), pos.end(), emb->row(2 * i).begin());
    std::copy(neg.begin(), neg.end(), emb->row(2 * i + 1).begin());
    auto& p = ds.pairs[i];
    p.pos = 2 * i;
    p.neg = 2 * i + 1;
    p.pos_label = gt.label(pos);
    p.neg_label = gt.label(neg);
  }
  ds.embeddings = std::move(emb);
  ds.provenance = {
      {"generator", "synthetic"},
      {"dim", std::to_string(cfg.dim)},
      {"n_pairs", std::to_string(cfg.n_pairs)},
      {"pair_mix", std::to_string(cfg.pair_mix)},
      {"noise", std::to_string(cfg.noise)},
      {"seed", std::to_string(cfg.seed)},
  };
  return {std::move(ds), std::move(gt)};
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("test_fraction must lie in (0, 1)");
  const std::size_t n = ds.pairs.size();
  if (n < 2) throw std::invalid_argument("cannot split a dataset with fewer than two pairs");
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

  Rng rng(seed, 0x5EED5E7ULL);
  const auto order = rng.permutation(n);
  std::vector<bool> in_test(n, false);
  for (std::size_t i = 0; i < n_test; ++i) in_test[order[i]] = true;

  Dataset train, test;
  train.embeddings = test.embeddings = ds.embeddings;
  train.provenance = test.provenance = ds.provenance;
  train.provenance["split"] = "train";
  test.provenance["split"] = "test";
  for (std::size_t i = 0; i < n; ++i) (in_test[i] ? test : train).pairs.push_back(ds.pairs[i]);
  return {std::move(train), std::move(test)};
}

MixStats pair_mix_stats(const Dataset& ds) {
  MixStats s;
  for (const auto& p : ds.pairs) {
    if (!p.labeled()) {
      ++s.unlabeled;
    } else if (*p.neg_label < 0) {
      (*p.pos_label > 0 ? s.t_to_nt : s.t_to_t)++;
    } else {
      (*p.pos_label > 0 ? s.nt_to_nt : s.nt_to_t)++;
    }
  }
  return s;
}

LabeledRows labeled_rows(std::span<const PreferencePair> pairs) {
  LabeledRows out;
  std::unordered_set<std::size_t> seen;
  auto add = [&](std::size_t row, const std::optional<Label>& l) {
    if (!l || !seen.insert(row).second) return;
    out.rows.push_back(row);
    out.labels.push_back(*l);
  };
  for (const auto& p : pairs) {
    add(p.pos, p.pos_label);
    add(p.neg, p.neg_label);
  }
  return out;
}

std::vector<std::size_t> referenced_rows(std::span<const PreferencePair> pairs) {
  std::vector<std::size_t> rows;
  std::unordered_set<std::size_t> seen;
  for (const auto& p : pairs)
    for (std::size_t r : {p.pos, p.neg})
      if (seen.insert(r).second) rows.push_back(r);
  return rows;
}

}  // namespace fairl
