#include "fairl/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "fairl/error.hpp"
#include "fairl/geometry.hpp"
#include "fairl/metrics.hpp"
#include "fairl/realign.hpp"
#include "fairl/rng.hpp"
#include "fairl/reward_model.hpp"
#include "fairl/trainer.hpp"
#include "json.hpp"

namespace fairl {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Output directory plus the sidecar log; the log is the only file with times.
class RunDir {
public:
  RunDir(const RunConfig& cfg, const std::string& command) : dir_(cfg.text("run.output_dir")), command_(command) {
    fs::create_directories(dir_);
    started_ = now_utc();
    add_file("resolved_config.ini", cfg.to_ini());
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void add(const fs::path& p) { written_.push_back(p); }

  void add_file(const std::string& name, const std::string& content) {
    const auto p = path(name);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed: " + p.string());
    add(p);
  }

  void add_json(const std::string& name, const ojson& j) { add_file(name, j.dump(2) + "\n"); }

  Artifacts finish() {
    for (const auto& p : written_) validate(p);
    std::ofstream log(path("run.log"), std::ios::binary);
    log << "command " << command_ << "\nstarted " << started_ << "\nfinished " << now_utc() << "\n";
    for (const auto& p : written_) log << "wrote " << p.filename().string() << "\n";
    return written_;
  }

private:
  static void validate(const fs::path& p) {
    if (!fs::exists(p) || fs::file_size(p) == 0) throw std::runtime_error("artifact missing or empty: " + p.string());
    const auto ext = p.extension().string();
    if (ext == ".json") {
      std::ifstream in(p);
      const auto j = nlohmann::json::parse(in, nullptr, false);
      if (j.is_discarded()) throw std::runtime_error("artifact is not valid JSON: " + p.string());
      if (j.contains("format") && j["format"] == "fairl-checkpoint") (void)load_checkpoint(p);
    } else if (ext == ".faem") {
      (void)read_embeddings(p);
    } else if (ext == ".jsonl") {
      (void)read_pairs(p);
    }
  }

  fs::path dir_;
  std::string command_;
  std::string started_;
  Artifacts written_;
};

std::string csv_double(double v) { return format_double(v); }

double slice_gamma(const RunConfig& cfg) {
  if (auto g = cfg.optional_real("metrics.slice_gamma")) return *g;
  return 0.1 * cfg.real("objective.margin");
}

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string mix_tag(double rho) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << rho;
  return os.str();
}

TrainResult run_training(const RunConfig& cfg, const Dataset& train_set, std::uint64_t seed, const std::string& mode,
                         const TrainOptions& options = {}) {
  TrainConfig tc = cfg.train(seed);
  tc.mode = parse_train_mode(mode);
  tc.validate();
  return train(train_set, tc, options);
}

}  // namespace

RunData load_run_data(const RunConfig& cfg, std::uint64_t seed) {
  RunData out;
  const auto& pairs = cfg.text("data.pairs");
  if (!pairs.empty()) {
    const auto& emb = cfg.text("data.embeddings");
    if (emb.empty()) throw std::invalid_argument("data.pairs is set but data.embeddings is not");
    out.dataset = load_dataset(pairs, emb);
    if (const auto& gt = cfg.text("data.ground_truth"); !gt.empty()) out.ground_truth = read_ground_truth(gt);
  } else {
    auto [ds, gt] = gen_synthetic(cfg.synthetic(seed, cfg.reals("data.pair_mix").front()));
    out.dataset = std::move(ds);
    out.ground_truth = std::move(gt);
  }
  if (out.ground_truth && out.ground_truth->theta_star.size() != out.dataset.dim())
    throw std::invalid_argument("ground truth dimension does not match the embeddings");
  return out;
}

std::pair<Dataset, Dataset> train_test_split(const RunConfig& cfg, const Dataset& ds, std::uint64_t seed) {
  const double f = cfg.real("data.test_fraction");
  if (f == 0.0) return {ds, ds};
  return split(ds, f, seed);
}

Artifacts cmd_gen(const RunConfig& cfg) {
  RunDir out(cfg, "gen");
  const auto mixes = cfg.reals("data.pair_mix");
  const auto seed = cfg.seeds().front();
  for (double rho : mixes) {
    auto [ds, gt] = gen_synthetic(cfg.synthetic(seed, rho));
    const std::string prefix = mixes.size() == 1 ? "" : "mix_" + mix_tag(rho) + "_";
    save_dataset(ds, out.path(prefix + "pairs.jsonl"), out.path(prefix + "embeddings.faem"));
    out.add(out.path(prefix + "pairs.jsonl"));
    out.add(out.path(prefix + "embeddings.faem"));
    write_ground_truth(out.path(prefix + "ground_truth.json"), gt);
    out.add(out.path(prefix + "ground_truth.json"));
  }
  return out.finish();
}

Artifacts cmd_train(const RunConfig& cfg) {
  RunDir out(cfg, "train");
  const auto seed = cfg.seeds().front();
  const auto data = load_run_data(cfg, seed);
  const auto [train_set, test_set] = train_test_split(cfg, data.dataset, seed);
  const std::string mode = cfg.text("train.mode");

  TrainOptions opts;
  if (const auto& resume = cfg.text("train.resume"); !resume.empty()) opts.resume = load_checkpoint(resume);
  opts.checkpoint_every = cfg.size("train.checkpoint_every");
  opts.on_checkpoint = [&](const Checkpoint& ck) {
    const auto name = "checkpoint_step" + std::to_string(ck.state ? ck.state->step : 0) + ".json";
    save_checkpoint(out.path(name), ck);
    out.add(out.path(name));
  };
  const auto res = run_training(cfg, train_set, seed, mode, opts);

  save_checkpoint(out.path("checkpoint.json"), Checkpoint{res.model, mode, res.state});
  out.add(out.path("checkpoint.json"));
  res.history.write_csv(out.path("history.csv"));
  out.add(out.path("history.csv"));
  return out.finish();
}

Artifacts cmd_eval(const RunConfig& cfg) {
  const auto& ck_path = cfg.text("model.checkpoint");
  if (ck_path.empty()) throw std::invalid_argument("eval needs model.checkpoint (--checkpoint)");
  if (!fs::exists(ck_path)) throw std::runtime_error("checkpoint not found: " + ck_path);
  RunDir out(cfg, "eval");
  const auto seed = cfg.seeds().front();
  const auto data = load_run_data(cfg, seed);
  const auto [train_set, test_set] = train_test_split(cfg, data.dataset, seed);
  const GroundTruth* gt = data.ground_truth ? &*data.ground_truth : nullptr;
  const double gamma = slice_gamma(cfg);

  const auto a = load_checkpoint(ck_path);
  auto rep = evaluate_model(a.model, train_set, test_set, gt, gamma, a.mode.empty() ? "a" : a.mode);

  if (const auto& ck_b = cfg.text("model.checkpoint_b"); !ck_b.empty()) {
    if (!fs::exists(ck_b)) throw std::runtime_error("checkpoint not found: " + ck_b);
    const auto b = load_checkpoint(ck_b);
    const auto rep_b = evaluate_model(b.model, train_set, test_set, gt, gamma, b.mode.empty() ? "b" : b.mode);
    const auto rows = labeled_rows(test_set.pairs);
    std::map<std::size_t, std::string> tag;
    for (const auto& p : test_set.pairs) {
      if (!p.subtype) continue;
      tag.emplace(p.pos, *p.subtype);
      tag.emplace(p.neg, *p.subtype);
    }
    std::vector<std::string> subtypes;
    for (std::size_t r : rows.rows) subtypes.push_back(tag.count(r) ? tag[r] : std::string());
    const auto sa = score_rows(a.model, *test_set.embeddings, rows.rows);
    const auto sb = score_rows(b.model, *test_set.embeddings, rows.rows);
    rep.disagreement = disagreement(sa, sb, rows.labels, rep.test.threshold, rep_b.test.threshold, subtypes);
    out.add_json("metrics_b.json", rep_b.to_json());
  }
  auto j = rep.to_json();
  j["seed"] = seed;
  j["run_id"] = cfg.text("run.run_id");
  out.add_json("metrics.json", j);
  return out.finish();
}

Artifacts cmd_geom(const RunConfig& cfg) {
  RunDir out(cfg, "geom");
  const auto seed = cfg.seeds().front();
  const auto& source = cfg.text("geometry.source");
  ojson j;
  j["source"] = source;
  j["seed"] = seed;
  if (source == "toy") {
    const auto scene = toy_2d_scene(seed, cfg.size("geometry.scene_points"));
    bool subset = true, strict = false;
    std::vector<std::vector<double>> base_pts, fa_pts;
    std::ostringstream csv;
    csv << "x,y,base_ok,fa_ok\n";
    for (std::size_t i = 0; i < scene.points.size(); ++i) {
      const auto& p = scene.points[i];
      subset &= !scene.fa_ok[i] || scene.base_ok[i];
      strict |= scene.base_ok[i] && !scene.fa_ok[i];
      if (scene.base_ok[i]) base_pts.push_back({p[0], p[1]});
      if (scene.fa_ok[i]) fa_pts.push_back({p[0], p[1]});
      csv << csv_double(p[0]) << ',' << csv_double(p[1]) << ',' << int(scene.base_ok[i]) << ',' << int(scene.fa_ok[i])
          << '\n';
    }
    const double n = static_cast<double>(scene.points.size());
    j["n_samples"] = scene.points.size();
    j["base_count"] = scene.base_count();
    j["fa_count"] = scene.fa_count();
    j["base_fraction"] = static_cast<double>(scene.base_count()) / n;
    j["fa_fraction"] = static_cast<double>(scene.fa_count()) / n;
    j["subset_holds"] = subset;
    j["strict"] = strict;
    j["diameters"] = {{"base", base_pts.size() >= 2 ? dispersion(base_pts).diameter : 0.0},
                      {"fa", fa_pts.size() >= 2 ? dispersion(fa_pts).diameter : 0.0}};
    ojson lines = ojson::array();
    for (std::size_t i = 0; i < scene.constraints.directions.size(); ++i) {
      const bool fail = std::count(scene.constraints.failure_indices.begin(), scene.constraints.failure_indices.end(), i);
      lines.push_back(ojson{{"direction", scene.constraints.directions[i]},
                       {"margin", fail ? scene.constraints.margin_fail : scene.constraints.base_margin},
                       {"failure", fail}});
    }
    j["constraints"] = std::move(lines);
    out.add_file("toy_points.csv", csv.str());
  } else if (source == "random") {
    const auto n_inst = cfg.size("geometry.n_instances");
    if (n_inst < 1) throw std::invalid_argument("geometry.n_instances must be at least 1");
    bool subset = true, strict = true, diam_ok = true;
    double base_sum = 0.0, fa_sum = 0.0;
    ojson rows = ojson::array();
    std::ostringstream csv;
    csv << "instance,base_fraction,fa_fraction,subset_holds,strict,base_diameter,fa_diameter\n";
    for (std::size_t i = 0; i < n_inst; ++i) {
      const auto inst_seed = derive_key(seed, i);
      const auto cs = random_constraint_set(cfg.size("geometry.dim"), cfg.size("geometry.n_constraints"),
                                            cfg.size("geometry.n_failures"), inst_seed, cfg.real("geometry.radius"),
                                            cfg.boolean("geometry.supported"));
      const auto rep = verify_subset(cs, cfg.sampling(inst_seed));
      subset &= rep.subset_holds;
      strict &= rep.strict;
      diam_ok &= rep.fa_diameter <= rep.base_diameter;
      base_sum += rep.base_fraction;
      fa_sum += rep.fa_fraction;
      rows.push_back(ojson{{"instance", i},
                      {"base_fraction", rep.base_fraction},
                      {"fa_fraction", rep.fa_fraction},
                      {"subset_holds", rep.subset_holds},
                      {"strict", rep.strict},
                      {"diameters", {{"base", rep.base_diameter}, {"fa", rep.fa_diameter}}}});
      csv << i << ',' << csv_double(rep.base_fraction) << ',' << csv_double(rep.fa_fraction) << ','
          << int(rep.subset_holds) << ',' << int(rep.strict) << ',' << csv_double(rep.base_diameter) << ','
          << csv_double(rep.fa_diameter) << '\n';
    }
    j["n_instances"] = n_inst;
    j["base_fraction"] = base_sum / static_cast<double>(n_inst);
    j["fa_fraction"] = fa_sum / static_cast<double>(n_inst);
    j["subset_holds"] = subset;
    j["strict"] = strict;
    j["diameter_monotone"] = diam_ok;
    j["instances"] = std::move(rows);
    out.add_file("geom_instances.csv", csv.str());
  } else {
    throw std::invalid_argument("geometry.source must be toy or random, got '" + source + "'");
  }
  out.add_json("geom.json", j);
  return out.finish();
}

Artifacts cmd_sweep(const RunConfig& cfg) {
  RunDir out(cfg, "sweep");
  const auto mixes = cfg.reals("sweep.pair_mixes");
  const auto modes = split_names(cfg.text("sweep.modes"));
  if (modes.empty()) throw std::invalid_argument("sweep.modes is empty");
  for (const auto& m : modes) (void)parse_train_mode(m);
  const auto seeds = cfg.seeds();

  struct Row {
    double rho;
    std::uint64_t seed;
    std::string mode;
    double t_to_nt;
    MetricsReport rep;
  };
  std::vector<Row> rows;
  for (double rho : mixes) {
    for (auto seed : seeds) {
      auto [ds, gt] = gen_synthetic(cfg.synthetic(seed, rho));
      const auto mix = pair_mix_stats(ds);
      const auto [train_set, test_set] = train_test_split(cfg, ds, seed);
      for (const auto& mode : modes) {
        const auto res = run_training(cfg, train_set, seed, mode);
        rows.push_back({rho, seed, mode, static_cast<double>(mix.t_to_nt) / static_cast<double>(mix.total()),
                        evaluate_model(res.model, train_set, test_set, &gt, slice_gamma(cfg), mode)});
      }
    }
  }

  std::ostringstream runs;
  runs << "pair_mix,seed,mode,t_to_nt_fraction,train_starc_l1,starc_l1,accuracy,f1,auc\n";
  for (const auto& r : rows)
    runs << csv_double(r.rho) << ',' << r.seed << ',' << r.mode << ',' << csv_double(r.t_to_nt) << ','
         << csv_double(*r.rep.train_starc_l1) << ',' << csv_double(*r.rep.starc_l1) << ','
         << csv_double(r.rep.test.accuracy) << ',' << csv_double(r.rep.test.f1) << ',' << csv_double(r.rep.test.auc)
         << '\n';
  out.add_file("sweep_runs.csv", runs.str());

  std::ostringstream table;
  table << "pair_mix,mode,n_seeds,train_starc_mean,train_starc_min,train_starc_max,accuracy_mean,accuracy_min,"
           "accuracy_max\n";
  ojson summary = ojson::array();
  for (double rho : mixes) {
    for (const auto& mode : modes) {
      std::vector<double> st, acc;
      for (const auto& r : rows)
        if (r.rho == rho && r.mode == mode) {
          st.push_back(*r.rep.train_starc_l1);
          acc.push_back(r.rep.test.accuracy);
        }
      auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); };
      const auto [smin, smax] = std::minmax_element(st.begin(), st.end());
      const auto [amin, amax] = std::minmax_element(acc.begin(), acc.end());
      table << csv_double(rho) << ',' << mode << ',' << st.size() << ',' << csv_double(mean(st)) << ','
            << csv_double(*smin) << ',' << csv_double(*smax) << ',' << csv_double(mean(acc)) << ','
            << csv_double(*amin) << ',' << csv_double(*amax) << '\n';
      summary.push_back(ojson{{"pair_mix", rho},
                         {"mode", mode},
                         {"n_seeds", st.size()},
                         {"train_starc_l1", {{"mean", mean(st)}, {"min", *smin}, {"max", *smax}}},
                         {"accuracy", {{"mean", mean(acc)}, {"min", *amin}, {"max", *amax}}}});
    }
  }
  out.add_file("sweep.csv", table.str());
  out.add_json("sweep.json", summary);
  return out.finish();
}

Artifacts cmd_realign(const RunConfig& cfg) {
  RunDir out(cfg, "realign");
  const auto seeds = cfg.seeds();
  const auto fa_mode = cfg.text("realign.fa_mode");
  std::vector<ComparisonReport> reports;
  for (auto seed : seeds) {
    auto [ds, gt] = gen_synthetic(cfg.synthetic(seed, cfg.reals("data.pair_mix").front()));
    const auto [train_set, test_set] = train_test_split(cfg, ds, seed);
    const auto fa = run_training(cfg, train_set, seed, fa_mode).model;
    const auto base = run_training(cfg, train_set, seed, "baseline").model;
    const auto env = gen_bandit_env(gt, cfg.bandit(seed));
    const std::vector<std::pair<std::string, RewardFn>> rewards = {
        {"gt", [&gt](std::span<const float> h) { return gt.score(h); }},
        {"fa", [&fa](std::span<const float> h) { return fa.score(h); }},
        {"baseline", [&base](std::span<const float> h) { return base.score(h); }},
    };
    reports.push_back(compare_rewards(env, rewards, cfg.policy(seed)));
    std::ostringstream csv;
    write_rate_csv(csv, reports.back());
    out.add_file("realign_seed" + std::to_string(seed) + ".csv", csv.str());
  }
  const auto summary = summarize(seeds, reports);

  // Mean trace over seeds; every seed shares the step grid.
  std::ostringstream csv;
  csv << "step,reward_id,toxicity_rate\n";
  for (std::size_t r = 0; r < summary.ids.size(); ++r) {
    const auto& first = summary.per_seed.front().rates[r].trace;
    for (std::size_t s = 0; s < first.size(); ++s) {
      double m = 0.0;
      for (const auto& rep : summary.per_seed) m += rep.rates[r].trace[s].toxicity_rate;
      csv << first[s].step << ',' << summary.ids[r] << ',' << csv_double(m / double(summary.per_seed.size())) << '\n';
    }
  }
  out.add_file("realign.csv", csv.str());

  ojson j;
  j["fa_mode"] = fa_mode;
  j["untrained_rate"] = summary.mean_untrained_rate;
  ojson means = ojson::object();
  for (std::size_t i = 0; i < summary.ids.size(); ++i) means[summary.ids[i]] = summary.mean_rates[i];
  j["mean_rates"] = std::move(means);
  j["ordering_holds"] = summary.ordering_holds();
  ojson per = ojson::array();
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const auto& rep = summary.per_seed[s];
    ojson rates = ojson::object();
    for (const auto& r : rep.rates) rates[r.id] = {{"toxicity_rate", r.toxicity_rate}, {"kl", r.kl}};
    per.push_back(ojson{{"seed", seeds[s]},
                   {"untrained_rate", rep.untrained_rate},
                   {"rates", std::move(rates)},
                   {"ascending", rep.ascending},
                   {"tied_with_next", rep.tied_with_next}});
  }
  j["per_seed"] = std::move(per);
  out.add_json("realign.json", j);
  return out.finish();
}

Artifacts cmd_report(const RunConfig& cfg, const std::vector<fs::path>& inputs) {
  if (inputs.empty()) throw std::invalid_argument("report needs at least one metrics JSON file");
  const std::vector<std::string> fields = {"accuracy", "f1", "auc", "starc_l1", "pair_accuracy"};
  std::vector<std::string> methods;
  std::map<std::string, std::map<std::string, std::vector<double>>> values;
  for (const auto& p : inputs) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw FormatError(p.string(), "document", "not a JSON object");
    const std::string method = j.value("method", std::string("unknown"));
    if (!values.count(method)) methods.push_back(method);
    for (const auto& f : fields)
      if (j.contains(f) && j[f].is_number()) values[method][f].push_back(j[f].get<double>());
  }
  RunDir out(cfg, "report");

  auto cell = [](const std::vector<double>& v) -> std::pair<double, double> {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
  };
  auto pm = [](double mean, double sd) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3) << mean << " ± " << sd;
    return os.str();
  };

  std::ostringstream csv, md;
  csv << "method,n";
  md << "| method | n";
  for (const auto& f : fields) {
    csv << ',' << f;
    md << " | " << f;
  }
  csv << '\n';
  md << " |\n|---|---";
  for (std::size_t i = 0; i < fields.size(); ++i) md << "|---";
  md << "|\n";
  ojson j = ojson::array();
  for (const auto& m : methods) {
    std::size_t n = 0;
    for (const auto& [f, v] : values[m]) n = std::max(n, v.size());
    csv << m << ',' << n;
    md << "| " << m << " | " << n;
    ojson row{{"method", m}, {"n", n}};
    for (const auto& f : fields) {
      const auto& v = values[m][f];
      if (v.empty()) {
        csv << ',';
        md << " | -";
        row[f] = nullptr;
        continue;
      }
      const auto [mean, sd] = cell(v);
      csv << ',' << pm(mean, sd);
      md << " | " << pm(mean, sd);
      row[f] = {{"mean", mean}, {"std", sd}, {"n", v.size()}};
    }
    csv << '\n';
    md << " |\n";
    j.push_back(std::move(row));
  }
  out.add_file("report.csv", csv.str());
  out.add_file("report.md", md.str());
  out.add_json("report.json", j);
  return out.finish();
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Failure-aware reward learning from preference pairs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fairl 0.1.0");

  std::string config_path, seeds, out_dir, mode;
  std::vector<std::string> overrides;
  std::vector<std::string> report_inputs;
  // flag -> config key
  std::vector<std::pair<std::string, std::string>> shortcuts;
  std::map<std::string, std::string> shortcut_values;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seeds, "seed or comma-separated seed list (run.seeds)");
    sub->add_option("--out", out_dir, "output directory (run.output_dir)");
    sub->add_option("--mode", mode, "training mode (train.mode)");
    sub->add_option("--set", overrides, "section.key=value override, repeatable");
  };
  auto shortcut = [&](CLI::App* sub, const std::string& flag, const std::string& key) {
    sub->add_option(flag, shortcut_values[flag], "sets " + key);
    shortcuts.emplace_back(flag, key);
  };
  const std::vector<std::pair<std::string, std::string>> data_flags = {
      {"--pairs", "data.pairs"},         {"--embeddings", "data.embeddings"}, {"--ground-truth", "data.ground_truth"},
      {"--dim", "data.dim"},             {"--n-pairs", "data.n_pairs"},       {"--pair-mix", "data.pair_mix"},
      {"--noise", "data.noise"},         {"--test-fraction", "data.test_fraction"}};
  const std::vector<std::pair<std::string, std::string>> train_flags = {
      {"--objective", "objective.kind"},     {"--head", "model.head"},
      {"--epochs", "train.epochs"},          {"--lr", "train.learning_rate"},
      {"--batch-size", "train.batch_size"},  {"--lambda-init", "failure.lambda_init"},
      {"--gamma-start", "failure.gamma_start"}, {"--curriculum", "failure.curriculum"},
      {"--resume", "train.resume"}};

  auto* gen = app.add_subcommand("gen", "generate a synthetic preference dataset");
  auto* trn = app.add_subcommand("train", "train a reward model");
  auto* evl = app.add_subcommand("eval", "evaluate checkpoints");
  auto* geo = app.add_subcommand("geom", "feasible-set geometry checks");
  auto* swp = app.add_subcommand("sweep", "pair-mix sweep");
  auto* rea = app.add_subcommand("realign", "bandit re-alignment comparison");
  auto* rep = app.add_subcommand("report", "aggregate metrics files");
  for (auto* sub : {gen, trn, evl, geo, swp, rea, rep}) common(sub);
  for (auto* sub : {gen, trn, evl, swp, rea})
    for (const auto& [f, k] : data_flags) shortcut(sub, f, k);
  for (auto* sub : {trn, swp, rea})
    for (const auto& [f, k] : train_flags) shortcut(sub, f, k);
  shortcut(evl, "--checkpoint", "model.checkpoint");
  shortcut(evl, "--checkpoint-b", "model.checkpoint_b");
  shortcut(geo, "--source", "geometry.source");
  shortcut(geo, "--n-samples", "geometry.n_samples");
  shortcut(rea, "--kl-coef", "realign.kl_coef");
  shortcut(rea, "--steps", "realign.steps");
  rep->add_option("inputs", report_inputs, "metrics JSON files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = RunConfig::load(config_path);
    for (const auto& o : overrides) cfg.apply_override(o);
    for (const auto& [flag, key] : shortcuts)
      if (const auto& v = shortcut_values[flag]; !v.empty()) cfg.set(key, v);
    if (!seeds.empty()) cfg.set("run.seeds", seeds);
    if (!out_dir.empty()) cfg.set("run.output_dir", out_dir);
    if (!mode.empty()) cfg.set("train.mode", mode);
    (void)cfg.train(0);
  } catch (const std::exception& e) {
    std::cerr << "fairl: configuration error: " << e.what() << "\n";
    return 2;
  }

  try {
    Artifacts written;
    if (*gen) written = cmd_gen(cfg);
    else if (*trn) written = cmd_train(cfg);
    else if (*evl) written = cmd_eval(cfg);
    else if (*geo) written = cmd_geom(cfg);
    else if (*swp) written = cmd_sweep(cfg);
    else if (*rea) written = cmd_realign(cfg);
    else written = cmd_report(cfg, std::vector<fs::path>(report_inputs.begin(), report_inputs.end()));
    for (const auto& p : written) std::cout << p.string() << "\n";
  } catch (const std::invalid_argument& e) {
    std::cerr << "fairl: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "fairl: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace fairl
