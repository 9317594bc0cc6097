#include "fairl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fairl/error.hpp"
#include "fairl/objectives.hpp"

namespace fairl {

namespace {

void check_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

void check_both_classes(std::span<const Label> labels, const char* what) {
  bool pos = false, neg = false;
  for (Label l : labels) (l > 0 ? pos : neg) = true;
  if (!pos || !neg) throw std::invalid_argument(std::string(what) + ": both classes must be present");
}

double mean(std::span<const double> v) { return pairwise_sum(v) / static_cast<double>(v.size()); }

}  // namespace

std::vector<double> canonicalize_l1(std::span<const double> r) {
  if (r.size() < 2) throw DegenerateError("canonicalize_l1: need at least two scores");
  const double mu = mean(r);
  std::vector<double> s(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) s[i] = r[i] - mu;
  std::vector<double> abs_dev(s.size());
  std::transform(s.begin(), s.end(), abs_dev.begin(), [](double x) { return std::abs(x); });
  const double norm = pairwise_sum(abs_dev);
  if (!(norm >= kDegenerateEps)) throw DegenerateError("canonicalize_l1: constant score vector");
  for (double& x : s) x /= norm;
  return s;
}

double starc_l1(std::span<const double> r_hat, std::span<const double> r_gt) {
  check_same_length(r_hat.size(), r_gt.size(), "starc_l1");
  const auto a = canonicalize_l1(r_hat);
  const auto b = canonicalize_l1(r_gt);
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = std::abs(a[i] - b[i]);
  // Both forms have unit L1 norm, so rounding is the only way past 2.
  return std::min(2.0, pairwise_sum(d));
}

AffineFit affine_fit(std::span<const double> r_hat, std::span<const double> r_gt) {
  check_same_length(r_hat.size(), r_gt.size(), "starc_affine");
  if (r_gt.size() < 2) throw DegenerateError("starc_affine: need at least two scores");
  const double mh = mean(r_hat);
  const double mg = mean(r_gt);
  std::vector<double> cov(r_gt.size()), var(r_gt.size());
  for (std::size_t i = 0; i < r_gt.size(); ++i) {
    const double dg = r_gt[i] - mg;
    cov[i] = (r_hat[i] - mh) * dg;
    var[i] = dg * dg;
  }
  const double n = static_cast<double>(r_gt.size());
  const double var_gt = pairwise_sum(var) / n;
  if (!(var_gt >= kDegenerateEps)) throw DegenerateError("starc_affine: constant ground-truth scores");
  AffineFit fit;
  fit.a = (pairwise_sum(cov) / n) / var_gt;
  if (!(fit.a > 0.0)) {
    fit.a = kDegenerateEps;
    fit.clamped = true;
  }
  fit.b = mh - fit.a * mg;
  std::vector<double> sq(r_gt.size());
  for (std::size_t i = 0; i < r_gt.size(); ++i) {
    const double e = r_hat[i] - (fit.a * r_gt[i] + fit.b);
    sq[i] = e * e;
  }
  fit.mse = pairwise_sum(sq) / n;
  return fit;
}

double starc_affine(std::span<const double> r_hat, std::span<const double> r_gt) {
  return affine_fit(r_hat, r_gt).mse;
}

double accuracy_at(std::span<const double> scores, std::span<const Label> labels, double threshold) {
  check_same_length(scores.size(), labels.size(), "accuracy");
  if (scores.empty()) throw std::invalid_argument("accuracy: empty input");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) correct += ((scores[i] >= threshold) == (labels[i] > 0));
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

ThresholdChoice select_threshold(std::span<const double> scores, std::span<const Label> labels) {
  check_same_length(scores.size(), labels.size(), "select_threshold");
  check_both_classes(labels, "select_threshold");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sweep thresholds from -inf upward. At -inf everything is predicted +1,
  // so the correct count equals the number of positives.
  std::size_t correct = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](Label l) { return l > 0; }));
  ThresholdChoice best{-std::numeric_limits<double>::infinity(), static_cast<double>(correct) / static_cast<double>(n)};
  std::size_t best_correct = correct;
  std::size_t i = 0;
  while (i < n) {
    // Move the whole group of equal scores below the threshold.
    const double v = scores[order[i]];
    while (i < n && scores[order[i]] == v) {
      correct += labels[order[i]] > 0 ? std::size_t(0) : std::size_t(1);
      correct -= labels[order[i]] > 0 ? std::size_t(1) : std::size_t(0);
      ++i;
    }
    const double thr = i < n ? v + (scores[order[i]] - v) / 2.0 : std::numeric_limits<double>::infinity();
    if (correct > best_correct) {
      best_correct = correct;
      best = {thr, static_cast<double>(correct) / static_cast<double>(n)};
    }
  }
  return best;
}

double roc_auc(std::span<const double> scores, std::span<const Label> labels) {
  check_same_length(scores.size(), labels.size(), "roc_auc");
  check_both_classes(labels, "roc_auc");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of mid-ranks of the positives.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    std::size_t pos_in_group = 0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      pos_in_group += labels[order[j]] > 0;
      ++j;
    }
    const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    rank_sum += mid_rank * static_cast<double>(pos_in_group);
    n_pos += pos_in_group;
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n - n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

ClassificationMetrics classification_metrics(std::span<const double> scores, std::span<const Label> labels,
                                             double threshold) {
  check_same_length(scores.size(), labels.size(), "classification_metrics");
  check_both_classes(labels, "classification_metrics");
  ClassificationMetrics m;
  m.n = scores.size();
  m.threshold = threshold;
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    const bool truth = labels[i] > 0;
    correct += pred == truth;
    tp += pred && truth;
    fp += pred && !truth;
    fn += !pred && truth;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.n);
  const std::size_t denom = 2 * tp + fp + fn;
  m.f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  m.auc = roc_auc(scores, labels);
  return m;
}

double pair_accuracy(std::span<const double> deltas) {
  if (deltas.empty()) throw std::invalid_argument("pair_accuracy: empty input");
  const auto correct = std::count_if(deltas.begin(), deltas.end(), [](double d) { return d > 0.0; });
  return static_cast<double>(correct) / static_cast<double>(deltas.size());
}

SliceReport failure_slice_metrics(const DualPathRewardModel& model, const EmbeddingMatrix& emb,
                                  std::span<const PreferencePair> pairs, double gamma, double threshold) {
  SliceReport rep;
  const auto deltas = margins(model, pairs, emb);
  std::vector<double> slice_deltas;
  std::vector<PreferencePair> slice_pairs;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const bool mis = deltas[i] <= 0.0;
    const bool tie = std::abs(deltas[i]) <= gamma;
    if (!mis && !tie) continue;
    rep.members.push_back(i);
    rep.n_misclassified += mis;
    rep.n_near_tie += tie;
    slice_deltas.push_back(deltas[i]);
    slice_pairs.push_back(pairs[i]);
  }
  if (rep.empty()) return rep;
  rep.pair_accuracy = pair_accuracy(slice_deltas);
  const auto rows = labeled_rows(slice_pairs);
  const bool has_pos = std::any_of(rows.labels.begin(), rows.labels.end(), [](Label l) { return l > 0; });
  const bool has_neg = std::any_of(rows.labels.begin(), rows.labels.end(), [](Label l) { return l < 0; });
  if (has_pos && has_neg) {
    const auto scores = score_rows(model, emb, rows.rows);
    rep.classification = classification_metrics(scores, rows.labels, threshold);
  }
  return rep;
}

DisagreementReport disagreement(std::span<const double> scores_a, std::span<const double> scores_b,
                                std::span<const Label> labels, double threshold_a, double threshold_b,
                                std::span<const std::string> subtypes) {
  check_same_length(scores_a.size(), scores_b.size(), "disagreement");
  check_same_length(scores_a.size(), labels.size(), "disagreement");
  if (!subtypes.empty()) check_same_length(scores_a.size(), subtypes.size(), "disagreement subtypes");
  DisagreementReport rep;
  auto bump = [](DisagreementCounts& c, bool a, bool b) {
    if (a && b) ++c.both_correct;
    else if (a) ++c.only_a_correct;
    else if (b) ++c.only_b_correct;
    else ++c.neither;
  };
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool a = (scores_a[i] >= threshold_a) == (labels[i] > 0);
    const bool b = (scores_b[i] >= threshold_b) == (labels[i] > 0);
    bump(rep.overall, a, b);
    if (!subtypes.empty() && !subtypes[i].empty()) bump(rep.by_subtype[subtypes[i]], a, b);
  }
  return rep;
}

namespace {

nlohmann::ordered_json counts_json(const DisagreementCounts& c) {
  nlohmann::ordered_json j;
  j["both_correct"] = c.both_correct;
  j["only_a_correct"] = c.only_a_correct;
  j["only_b_correct"] = c.only_b_correct;
  j["neither"] = c.neither;
  return j;
}

nlohmann::ordered_json classification_json(const ClassificationMetrics& m) {
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["f1"] = m.f1;
  j["auc"] = m.auc;
  j["threshold"] = m.threshold;
  j["n"] = m.n;
  return j;
}

nlohmann::ordered_json opt(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = method;
  j["accuracy"] = test.accuracy;
  j["f1"] = test.f1;
  j["auc"] = test.auc;
  j["threshold"] = test.threshold;
  j["n_eval"] = test.n;
  j["train_accuracy"] = train_accuracy;
  j["pair_accuracy"] = pair_accuracy;
  j["starc_l1"] = opt(starc_l1);
  j["starc_affine"] = opt(starc_affine);
  j["train_starc_l1"] = opt(train_starc_l1);
  if (slice) {
    nlohmann::ordered_json s;
    s["gamma"] = slice_gamma;
    s["size"] = slice->members.size();
    s["empty"] = slice->empty();
    s["n_misclassified"] = slice->n_misclassified;
    s["n_near_tie"] = slice->n_near_tie;
    s["pair_accuracy"] = slice->empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(slice->pair_accuracy);
    s["classification"] = slice->classification ? classification_json(*slice->classification) : nlohmann::ordered_json(nullptr);
    s["members"] = slice->members;
    j["slice"] = std::move(s);
  }
  if (disagreement) {
    nlohmann::ordered_json d = counts_json(disagreement->overall);
    nlohmann::ordered_json by = nlohmann::ordered_json::object();
    for (const auto& [tag, c] : disagreement->by_subtype) by[tag] = counts_json(c);
    d["by_subtype"] = std::move(by);
    j["disagreement"] = std::move(d);
  }
  return j;
}

MetricsReport evaluate_model(const DualPathRewardModel& model, const Dataset& train, const Dataset& test,
                             const GroundTruth* gt, double slice_gamma, const std::string& method) {
  if (!train.embeddings || !test.embeddings) throw std::invalid_argument("evaluate_model: dataset without embeddings");
  MetricsReport rep;
  rep.method = method;
  rep.slice_gamma = slice_gamma;

  const auto tr = labeled_rows(train.pairs);
  const auto tr_scores = score_rows(model, *train.embeddings, tr.rows);
  const bool tr_both = std::count(tr.labels.begin(), tr.labels.end(), Label{1}) > 0 &&
                       std::count(tr.labels.begin(), tr.labels.end(), Label{-1}) > 0;
  const double threshold = tr_both ? select_threshold(tr_scores, tr.labels).threshold : 0.0;
  rep.train_accuracy = tr.rows.empty() ? 0.0 : accuracy_at(tr_scores, tr.labels, threshold);

  const auto te = labeled_rows(test.pairs);
  const auto te_scores = score_rows(model, *test.embeddings, te.rows);
  rep.test = classification_metrics(te_scores, te.labels, threshold);
  rep.pair_accuracy = pair_accuracy(margins(model, test.pairs, *test.embeddings));

  if (gt) {
    auto starc_over = [&](const Dataset& ds, bool affine) {
      const auto rows = referenced_rows(ds.pairs);
      const auto hat = score_rows(model, *ds.embeddings, rows);
      std::vector<double> ref(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) ref[i] = gt->score(ds.embeddings->row(rows[i]));
      return affine ? starc_affine(hat, ref) : starc_l1(hat, ref);
    };
    rep.starc_l1 = starc_over(test, false);
    rep.starc_affine = starc_over(test, true);
    rep.train_starc_l1 = starc_over(train, false);
  }
  rep.slice = failure_slice_metrics(model, *test.embeddings, test.pairs, slice_gamma, threshold);
  return rep;
}

}  // namespace fairl
