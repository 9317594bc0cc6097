#include "fairl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "fairl/reward_model.hpp"

namespace fairl {

namespace {

using Type = RunConfig::Type;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_real(const std::string& s, double& out) {
  try {
    out = parse_double(s);
  } catch (const std::exception&) {
    return false;
  }
  return std::isfinite(out);
}

bool parse_int(const std::string& s, std::int64_t& out) {
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes") return out = true, true;
  if (s == "false" || s == "0" || s == "no") return out = false, true;
  return false;
}

bool well_typed(Type t, const std::string& v) {
  double r = 0;
  std::int64_t i = 0;
  bool b = false;
  switch (t) {
    case Type::text: return true;
    case Type::real: return parse_real(v, r);
    case Type::optional_real: return v.empty() || parse_real(v, r);
    case Type::integer: return parse_int(v, i);
    case Type::boolean: return parse_bool(v, b);
    case Type::real_list: {
      const auto items = split_list(v);
      return !items.empty() && std::all_of(items.begin(), items.end(), [&](const auto& x) { return parse_real(x, r); });
    }
    case Type::integer_list: {
      const auto items = split_list(v);
      return !items.empty() && std::all_of(items.begin(), items.end(), [&](const auto& x) { return parse_int(x, i); });
    }
  }
  return false;
}

const char* type_name(Type t) {
  switch (t) {
    case Type::text: return "text";
    case Type::real: return "real";
    case Type::optional_real: return "real or empty";
    case Type::integer: return "integer";
    case Type::boolean: return "boolean";
    case Type::real_list: return "comma-separated reals";
    case Type::integer_list: return "comma-separated integers";
  }
  return "?";
}

std::vector<RunConfig::Key> default_keys() {
  return {
      {"run.seeds", Type::integer_list, "0", "seed list; single-run commands use the first"},
      {"run.output_dir", Type::text, "out", "artifact directory"},
      {"run.run_id", Type::text, "", "label copied into outputs"},

      {"data.pairs", Type::text, "", "pairs JSON-lines file; empty generates synthetic data"},
      {"data.embeddings", Type::text, "", "FAEM embedding file"},
      {"data.ground_truth", Type::text, "", "ground-truth JSON for STARC"},
      {"data.dim", Type::integer, "8", "synthetic embedding width"},
      {"data.n_pairs", Type::integer, "1000", "synthetic pair count"},
      {"data.pair_mix", Type::real_list, "0.5", "fraction of T->NT pairs; a list makes gen write one dataset each"},
      {"data.noise", Type::real, "0", "Bradley-Terry temperature, 0 is noiseless"},
      {"data.bias_star", Type::real, "0", "ground-truth bias"},
      {"data.label_threshold", Type::real, "0", "label threshold on R*"},
      {"data.test_fraction", Type::real, "0.2", "held-out share; 0 trains and evaluates on everything"},

      {"model.head", Type::text, "linear", "linear | mlp"},
      {"model.hidden_width", Type::integer, "64", "mlp hidden units"},
      {"model.checkpoint", Type::text, "", "checkpoint for eval"},
      {"model.checkpoint_b", Type::text, "", "second checkpoint for the disagreement section"},

      {"objective.kind", Type::text, "max-entropy", "max-entropy | max-margin"},
      {"objective.margin", Type::real, "0.8", "M"},
      {"objective.margin_fail", Type::real, "1.6", "M_fail"},
      {"objective.tau", Type::real, "1", "base temperature"},
      {"objective.tau_fail", Type::real, "0.5", "failure temperature"},
      {"objective.w_fail", Type::real, "2", "failure weight (sharpen = weight)"},
      {"objective.sharpen", Type::text, "temperature", "temperature | weight"},

      {"failure.gamma_start", Type::optional_real, "", "empty: M for max-margin, 0.5 for max-entropy"},
      {"failure.gamma_end", Type::real, "0", ""},
      {"failure.lambda_init", Type::real, "10", ""},
      {"failure.lambda_decay", Type::text, "exp", "exp | constant"},
      {"failure.lambda_final_ratio", Type::real, "0.01", ""},
      {"failure.p_rate", Type::real, "1", "per-failure sampling probability"},
      {"failure.curriculum", Type::text, "threshold", "threshold | bottom-k"},
      {"failure.rounds", Type::integer, "100", ""},
      {"failure.fail_frac_start", Type::real, "0.2", ""},
      {"failure.fail_frac_end", Type::real, "0", ""},
      {"failure.supervised_rule", Type::text, "misclassified", "misclassified | pairwise"},

      {"train.mode", Type::text, "baseline", "baseline | fa-supervised | fa-margin | fa-self-supervised"},
      {"train.batch_size", Type::integer, "32", ""},
      {"train.epochs", Type::integer, "800", ""},
      {"train.learning_rate", Type::real, "0.001", ""},
      {"train.optimizer", Type::text, "adam", "adam | sgd"},
      {"train.early_stop_patience", Type::integer, "20", "0 disables"},
      {"train.min_delta", Type::real, "1e-5", ""},
      {"train.val_fraction", Type::real, "0.1", ""},
      {"train.epochs_per_round", Type::integer, "0", "self-supervised; 0 is epochs / rounds"},
      {"train.checkpoint_every", Type::integer, "0", "steps between intermediate checkpoints"},
      {"train.resume", Type::text, "", "checkpoint with trainer state to continue from"},

      {"metrics.slice_gamma", Type::optional_real, "", "empty: 0.1 * M"},

      {"geometry.source", Type::text, "toy", "toy | random"},
      {"geometry.n_samples", Type::integer, "200000", ""},
      {"geometry.radius", Type::real, "10", ""},
      {"geometry.domain", Type::text, "sphere", "sphere | ball"},
      {"geometry.dim", Type::integer, "8", "random instances"},
      {"geometry.n_constraints", Type::integer, "12", ""},
      {"geometry.n_failures", Type::integer, "1", ""},
      {"geometry.n_instances", Type::integer, "10", ""},
      {"geometry.supported", Type::boolean, "true", ""},
      {"geometry.scene_points", Type::integer, "2000", ""},

      {"realign.n_contexts", Type::integer, "500", ""},
      {"realign.n_candidates", Type::integer, "8", "K"},
      {"realign.label_balanced", Type::boolean, "true", ""},
      {"realign.context_spread", Type::real, "0.1", "within-context candidate spread; 1 is independent"},
      {"realign.kl_coef", Type::real, "0.05", ""},
      {"realign.steps", Type::integer, "300", ""},
      {"realign.learning_rate", Type::real, "0.5", ""},
      {"realign.batch_contexts", Type::integer, "0", "0 uses every context each step"},
      {"realign.record_every", Type::integer, "10", ""},
      {"realign.normalize_rewards", Type::boolean, "true", ""},
      {"realign.fa_mode", Type::text, "fa-supervised", "training mode for the fa reward"},

      {"sweep.pair_mixes", Type::real_list, "0.2,0.5,0.8", ""},
      {"sweep.modes", Type::text, "baseline,fa-supervised", "comma-separated training modes"},
  };
}

}  // namespace

RunConfig::RunConfig() : keys_(default_keys()) {}

const RunConfig::Key& RunConfig::find(const std::string& name) const {
  for (const auto& k : keys_)
    if (k.name == name) return k;
  throw std::invalid_argument("unknown config key '" + name + "'");
}

RunConfig::Key& RunConfig::find(const std::string& name) {
  return const_cast<Key&>(static_cast<const RunConfig&>(*this).find(name));
}

void RunConfig::set(const std::string& name, const std::string& value) {
  Key& k = find(name);
  const std::string v = trim(value);
  if (!well_typed(k.type, v))
    throw std::invalid_argument("config key '" + name + "' expects " + type_name(k.type) + ", got '" + v + "'");
  k.value = v;
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("override '" + assignment + "' is not section.key=value");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

RunConfig RunConfig::parse(const std::string& text, const std::string& source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(source + ": line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw std::invalid_argument(source + ": key '" + section + "' outside a section");
    const bool known = std::any_of(cfg.keys_.begin(), cfg.keys_.end(),
                                   [&](const Key& k) { return k.name.rfind(section + ".", 0) == 0; });
    if (!known) throw std::invalid_argument(source + ": unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      try {
        cfg.set(section + "." + key, value.data());
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(source + ": " + e.what());
      }
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

const std::string& RunConfig::text(const std::string& name) const { return find(name).value; }

double RunConfig::real(const std::string& name) const { return parse_double(find(name).value); }

std::optional<double> RunConfig::optional_real(const std::string& name) const {
  const auto& v = find(name).value;
  if (v.empty()) return std::nullopt;
  return parse_double(v);
}

std::int64_t RunConfig::integer(const std::string& name) const {
  std::int64_t v = 0;
  parse_int(find(name).value, v);
  return v;
}

std::size_t RunConfig::size(const std::string& name) const {
  const auto v = integer(name);
  if (v < 0) throw std::invalid_argument("config key '" + name + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

bool RunConfig::boolean(const std::string& name) const {
  bool b = false;
  parse_bool(find(name).value, b);
  return b;
}

std::vector<double> RunConfig::reals(const std::string& name) const {
  std::vector<double> out;
  for (const auto& item : split_list(find(name).value)) out.push_back(parse_double(item));
  return out;
}

std::vector<std::uint64_t> RunConfig::seeds() const {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(find("run.seeds").value)) {
    std::int64_t v = 0;
    parse_int(item, v);
    if (v < 0) throw std::invalid_argument("seeds must be non-negative");
    out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

std::string RunConfig::to_ini() const {
  std::string out;
  std::string section;
  for (const auto& k : keys_) {
    const auto dot = k.name.find('.');
    const auto sec = k.name.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out += '\n';
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += k.name.substr(dot + 1) + " = " + k.value + "\n";
  }
  return out;
}

void RunConfig::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << to_ini();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

SyntheticConfig RunConfig::synthetic(std::uint64_t seed, double pair_mix) const {
  SyntheticConfig c;
  c.dim = size("data.dim");
  c.n_pairs = size("data.n_pairs");
  c.pair_mix = pair_mix;
  c.noise = real("data.noise");
  c.bias_star = real("data.bias_star");
  c.label_threshold = real("data.label_threshold");
  c.seed = seed;
  return c;
}

ObjectiveConfig RunConfig::objective() const {
  ObjectiveConfig c;
  c.kind = parse_objective_kind(text("objective.kind"));
  c.margin = real("objective.margin");
  c.margin_fail = real("objective.margin_fail");
  c.tau = real("objective.tau");
  c.tau_fail = real("objective.tau_fail");
  c.w_fail = real("objective.w_fail");
  c.sharpen = parse_sharpening(text("objective.sharpen"));
  return c;
}

ScheduleConfig RunConfig::schedule() const {
  ScheduleConfig c;
  c.gamma_start = optional_real("failure.gamma_start");
  c.gamma_end = real("failure.gamma_end");
  c.lambda_init = real("failure.lambda_init");
  c.lambda_decay = parse_lambda_decay(text("failure.lambda_decay"));
  c.lambda_final_ratio = real("failure.lambda_final_ratio");
  c.p_rate = real("failure.p_rate");
  c.curriculum = parse_curriculum(text("failure.curriculum"));
  c.rounds = size("failure.rounds");
  c.fail_frac_start = real("failure.fail_frac_start");
  c.fail_frac_end = real("failure.fail_frac_end");
  c.supervised_rule = parse_supervised_rule(text("failure.supervised_rule"));
  return c;
}

TrainConfig RunConfig::train(std::uint64_t seed) const {
  TrainConfig c;
  c.objective = objective();
  c.schedule = schedule();
  c.head = parse_head_kind(text("model.head"));
  c.hidden_width = size("model.hidden_width");
  c.batch_size = size("train.batch_size");
  c.epochs = size("train.epochs");
  c.learning_rate = real("train.learning_rate");
  c.optimizer = parse_optimizer_kind(text("train.optimizer"));
  c.early_stop_patience = size("train.early_stop_patience");
  c.min_delta = real("train.min_delta");
  c.val_fraction = real("train.val_fraction");
  c.epochs_per_round = size("train.epochs_per_round");
  c.seed = seed;
  c.mode = parse_train_mode(text("train.mode"));
  c.validate();
  return c;
}

SamplingConfig RunConfig::sampling(std::uint64_t seed) const {
  SamplingConfig c;
  c.n_samples = size("geometry.n_samples");
  c.seed = seed;
  c.radius = real("geometry.radius");
  const auto& dom = text("geometry.domain");
  if (dom == "sphere") c.domain = SampleDomain::sphere;
  else if (dom == "ball") c.domain = SampleDomain::ball;
  else throw std::invalid_argument("geometry.domain must be sphere or ball, got '" + dom + "'");
  return c;
}

BanditConfig RunConfig::bandit(std::uint64_t seed) const {
  BanditConfig c;
  c.n_contexts = size("realign.n_contexts");
  c.n_candidates = size("realign.n_candidates");
  c.label_balanced = boolean("realign.label_balanced");
  c.context_spread = real("realign.context_spread");
  c.seed = seed;
  return c;
}

PolicyTrainConfig RunConfig::policy(std::uint64_t seed) const {
  PolicyTrainConfig c;
  c.kl_coef = real("realign.kl_coef");
  c.steps = size("realign.steps");
  c.learning_rate = real("realign.learning_rate");
  c.batch_contexts = size("realign.batch_contexts");
  c.normalize_rewards = boolean("realign.normalize_rewards");
  c.record_every = size("realign.record_every");
  c.seed = seed;
  c.validate();
  return c;
}

}  // namespace fairl
