#include "fairl/reward_model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "fairl/error.hpp"
#include "fairl/rng.hpp"
#include "json.hpp"

namespace fairl {

using ordered_json = nlohmann::ordered_json;

std::string to_string(HeadKind h) { return h == HeadKind::linear ? "linear" : "mlp"; }

HeadKind parse_head_kind(const std::string& s) {
  if (s == "linear") return HeadKind::linear;
  if (s == "mlp") return HeadKind::mlp;
  throw std::invalid_argument("unknown head kind \"" + s + "\" (expected linear or mlp)");
}

DualPathRewardModel::DualPathRewardModel(std::size_t dim, HeadKind head, std::size_t hidden_width)
    : dim_(dim), head_(head), hidden_(head == HeadKind::mlp ? hidden_width : 0) {
  if (dim == 0) throw std::invalid_argument("reward model dimension must be positive");
  if (head == HeadKind::mlp && hidden_width == 0) throw std::invalid_argument("MLP hidden width must be positive");
  params_.assign(2 * path_size(), 0.0);
}

std::size_t DualPathRewardModel::path_size() const {
  return head_ == HeadKind::linear ? dim_ + 1 : hidden_ * dim_ + 2 * hidden_ + 1;
}

std::span<double> DualPathRewardModel::path_params(Path p) {
  return std::span<double>(params_).subspan(path_offset(p), path_size());
}

std::span<const double> DualPathRewardModel::path_params(Path p) const {
  return std::span<const double>(params_).subspan(path_offset(p), path_size());
}

std::span<double> DualPathRewardModel::theta(Path p) {
  if (head_ != HeadKind::linear) throw std::logic_error("theta() requires the linear head");
  return path_params(p).first(dim_);
}

std::span<const double> DualPathRewardModel::theta(Path p) const {
  if (head_ != HeadKind::linear) throw std::logic_error("theta() requires the linear head");
  return path_params(p).first(dim_);
}

double& DualPathRewardModel::bias(Path p) {
  if (head_ != HeadKind::linear) throw std::logic_error("bias() requires the linear head");
  return path_params(p)[dim_];
}

double DualPathRewardModel::bias(Path p) const {
  if (head_ != HeadKind::linear) throw std::logic_error("bias() requires the linear head");
  return path_params(p)[dim_];
}

bool DualPathRewardModel::is_failure_weight(std::size_t i) const {
  const std::size_t off = path_offset(Path::failure);
  if (i < off || i >= off + path_size()) return false;
  const std::size_t k = i - off;
  if (head_ == HeadKind::linear) return k < dim_;
  const std::size_t w1 = hidden_ * dim_;
  // W1 and w2 are weights; b1 and b2 are biases.
  return k < w1 || (k >= w1 + hidden_ && k < w1 + 2 * hidden_);
}

void DualPathRewardModel::check_dim(std::span<const float> h) const {
  if (h.size() != dim_)
    throw std::invalid_argument("embedding dimension " + std::to_string(h.size()) +
                                " does not match model dimension " + std::to_string(dim_));
}

double DualPathRewardModel::path_score(Path p, std::span<const float> h) const {
  check_dim(h);
  const auto w = path_params(p);
  if (head_ == HeadKind::linear) {
    double s = w[dim_];
    for (std::size_t j = 0; j < dim_; ++j) s += w[j] * static_cast<double>(h[j]);
    return s;
  }
  const double* w1 = w.data();
  const double* b1 = w1 + hidden_ * dim_;
  const double* w2 = b1 + hidden_;
  double out = w2[hidden_];
  for (std::size_t k = 0; k < hidden_; ++k) {
    double a = b1[k];
    const double* row = w1 + k * dim_;
    for (std::size_t j = 0; j < dim_; ++j) a += row[j] * static_cast<double>(h[j]);
    if (a > 0.0) out += w2[k] * a;
  }
  return out;
}

PathScores DualPathRewardModel::score_paths(std::span<const float> h) const {
  return {path_score(Path::base, h), path_score(Path::failure, h)};
}

void DualPathRewardModel::add_path_gradient(Path p, std::span<const float> h, double weight,
                                            std::span<double> grad) const {
  const auto w = path_params(p);
  double* g = grad.data() + path_offset(p);
  if (head_ == HeadKind::linear) {
    for (std::size_t j = 0; j < dim_; ++j) g[j] += weight * static_cast<double>(h[j]);
    g[dim_] += weight;
    return;
  }
  const double* w1 = w.data();
  const double* b1 = w1 + hidden_ * dim_;
  const double* w2 = b1 + hidden_;
  double* g_w1 = g;
  double* g_b1 = g_w1 + hidden_ * dim_;
  double* g_w2 = g_b1 + hidden_;
  for (std::size_t k = 0; k < hidden_; ++k) {
    double a = b1[k];
    const double* row = w1 + k * dim_;
    for (std::size_t j = 0; j < dim_; ++j) a += row[j] * static_cast<double>(h[j]);
    if (a <= 0.0) continue;  // relu'(0) taken as 0
    g_w2[k] += weight * a;
    const double back = weight * w2[k];
    g_b1[k] += back;
    double* grow = g_w1 + k * dim_;
    for (std::size_t j = 0; j < dim_; ++j) grow[j] += back * static_cast<double>(h[j]);
  }
  g_w2[hidden_] += weight;
}

void DualPathRewardModel::add_score_gradient(std::span<const float> h, double weight, std::span<double> grad,
                                             bool include_failure_path) const {
  check_dim(h);
  if (grad.size() != params_.size()) throw std::invalid_argument("gradient size does not match the model");
  add_path_gradient(Path::base, h, weight, grad);
  if (include_failure_path) add_path_gradient(Path::failure, h, weight, grad);
}

DualPathRewardModel init_model(std::size_t dim, HeadKind head, const InitConfig& init, std::size_t hidden_width) {
  DualPathRewardModel m(dim, head, hidden_width);
  Rng rng(init.seed, 0x1417ULL);
  for (Path p : {Path::base, Path::failure}) {
    auto w = m.path_params(p);
    if (head == HeadKind::linear) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
      for (double& v : w) v = rng.uniform(-bound, bound);
    } else {
      const std::size_t h = m.hidden_width();
      const double b_in = 1.0 / std::sqrt(static_cast<double>(dim));
      const double b_out = 1.0 / std::sqrt(static_cast<double>(h));
      const std::size_t first_layer = h * dim + h;  // W1 and b1
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double bound = i < first_layer ? b_in : b_out;
        w[i] = rng.uniform(-bound, bound);
      }
    }
  }
  return m;
}

double margin(const DualPathRewardModel& model, const PreferencePair& pair, const EmbeddingMatrix& emb) {
  if (pair.pos >= emb.count() || pair.neg >= emb.count()) throw std::out_of_range("pair index out of range");
  return model.score(emb.row(pair.pos)) - model.score(emb.row(pair.neg));
}

std::vector<double> margins(const DualPathRewardModel& model, std::span<const PreferencePair> pairs,
                            const EmbeddingMatrix& emb) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(margin(model, p, emb));
  return out;
}

double failure_path_l2(const DualPathRewardModel& model) {
  double s = 0.0;
  const auto params = model.params();
  for (std::size_t i = model.path_offset(Path::failure); i < params.size(); ++i)
    if (model.is_failure_weight(i)) s += params[i] * params[i];
  return s;
}

std::vector<double> score_rows(const DualPathRewardModel& model, const EmbeddingMatrix& emb,
                               std::span<const std::size_t> rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(model.score(emb.row(r)));
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("cannot format double");
  return {buf, end};
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) throw std::invalid_argument("invalid number \"" + s + "\"");
  return v;
}

namespace {

ordered_json encode(std::span<const double> values) {
  ordered_json arr = ordered_json::array();
  for (double v : values) arr.push_back(format_double(v));
  return arr;
}

void decode_into(const ordered_json& arr, std::span<double> out, const std::string& src, const std::string& key) {
  if (!arr.is_array() || arr.size() != out.size())
    throw FormatError(src, key, "expected an array of " + std::to_string(out.size()) + " values");
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!arr[i].is_string()) throw FormatError(src, key, "values must be decimal strings");
    const double v = parse_double(arr[i].get<std::string>());
    if (!std::isfinite(v)) throw FormatError(src, key + "[" + std::to_string(i) + "]", "non-finite parameter");
    out[i] = v;
  }
}

double decode_scalar(const ordered_json& v, const std::string& src, const std::string& key) {
  double out = 0.0;
  decode_into(ordered_json::array({v}), std::span<double>(&out, 1), src, key);
  return out;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  const auto& m = ckpt.model;
  ordered_json j;
  j["format"] = "fairl-checkpoint";
  j["version"] = 1;
  j["dim"] = m.dim();
  j["head_kind"] = to_string(m.head());
  if (m.head() == HeadKind::mlp) j["hidden_width"] = m.hidden_width();
  j["mode"] = ckpt.mode;
  ordered_json paths;
  for (Path p : {Path::base, Path::failure}) {
    const auto w = m.path_params(p);
    ordered_json path;
    if (m.head() == HeadKind::linear) {
      path["theta"] = encode(w.first(m.dim()));
      path["bias"] = format_double(w[m.dim()]);
    } else {
      const std::size_t h = m.hidden_width(), d = m.dim();
      path["w1"] = encode(w.subspan(0, h * d));
      path["b1"] = encode(w.subspan(h * d, h));
      path["w2"] = encode(w.subspan(h * d + h, h));
      path["b2"] = format_double(w[h * d + 2 * h]);
    }
    paths[p == Path::base ? "base" : "failure"] = std::move(path);
  }
  j["paths"] = std::move(paths);
  if (ckpt.state) {
    const auto& s = *ckpt.state;
    ordered_json st;
    st["step"] = s.step;
    st["adam_t"] = s.adam_t;
    st["m"] = encode(s.m);
    st["v"] = encode(s.v);
    st["has_best_val"] = s.has_best_val;
    st["best_val"] = format_double(s.best_val);
    st["bad_evals"] = s.bad_evals;
    j["trainer_state"] = std::move(st);
  }
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text, const std::string& src) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw FormatError(src, "document", e.what());
  }
  try {
    if (j.value("format", "") != "fairl-checkpoint") throw FormatError(src, "format", "not a fairl checkpoint");
    if (j.value("version", 0) != 1) throw FormatError(src, "version", "unsupported checkpoint version");
    const auto dim = j.at("dim").get<std::size_t>();
    const HeadKind head = parse_head_kind(j.at("head_kind").get<std::string>());
    const std::size_t hidden = head == HeadKind::mlp ? j.at("hidden_width").get<std::size_t>()
                                                     : DualPathRewardModel::kDefaultHidden;
    Checkpoint ckpt{DualPathRewardModel(dim, head, hidden), j.value("mode", std::string{}), std::nullopt};
    auto& m = ckpt.model;
    for (Path p : {Path::base, Path::failure}) {
      const std::string name = p == Path::base ? "base" : "failure";
      const auto& path = j.at("paths").at(name);
      auto w = m.path_params(p);
      if (head == HeadKind::linear) {
        decode_into(path.at("theta"), w.first(dim), src, name + ".theta");
        w[dim] = decode_scalar(path.at("bias"), src, name + ".bias");
      } else {
        const std::size_t h = m.hidden_width();
        decode_into(path.at("w1"), w.subspan(0, h * dim), src, name + ".w1");
        decode_into(path.at("b1"), w.subspan(h * dim, h), src, name + ".b1");
        decode_into(path.at("w2"), w.subspan(h * dim + h, h), src, name + ".w2");
        w[h * dim + 2 * h] = decode_scalar(path.at("b2"), src, name + ".b2");
      }
    }
    if (j.contains("trainer_state")) {
      const auto& st = j["trainer_state"];
      TrainerState s;
      s.step = st.at("step").get<std::uint64_t>();
      s.adam_t = st.at("adam_t").get<std::uint64_t>();
      s.m.resize(m.param_count());
      s.v.resize(m.param_count());
      decode_into(st.at("m"), s.m, src, "trainer_state.m");
      decode_into(st.at("v"), s.v, src, "trainer_state.v");
      s.has_best_val = st.at("has_best_val").get<bool>();
      s.best_val = parse_double(st.at("best_val").get<std::string>());
      s.bad_evals = st.at("bad_evals").get<std::uint64_t>();
      ckpt.state = std::move(s);
    }
    return ckpt;
  } catch (const ordered_json::exception& e) {
    throw FormatError(src, "document", e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << checkpoint_to_json(ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return checkpoint_from_json(text, path.string());
}

}  // namespace fairl
