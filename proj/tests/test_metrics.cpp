#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fairl/error.hpp"
#include "fairl/metrics.hpp"
#include "fairl/rng.hpp"
#include "support.hpp"

using namespace fairl;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  rng.fill_normal(v);
  return v;
}

// O(N^2) pairwise AUC: P(score+ > score-) + 0.5 P(tie).
double auc_oracle(const std::vector<double>& s, const std::vector<Label>& y) {
  double num = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] > 0 && y[j] < 0) {
        ++pairs;
        num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return num / static_cast<double>(pairs);
}

}  // namespace

TEST(Canonicalize, Examples) {
  const auto s = canonicalize_l1(std::vector<double>{1.0, 3.0});
  EXPECT_DOUBLE_EQ(s[0], -0.5);
  EXPECT_DOUBLE_EQ(s[1], 0.5);
  EXPECT_THROW(canonicalize_l1(std::vector<double>{2.0, 2.0, 2.0}), DegenerateError);
}

TEST(Canonicalize, MeanZeroUnitL1AndAffineInvariant) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    auto r = random_vector(rng, 2 + rng.below(50));
    const auto s = canonicalize_l1(r);
    double sum = 0.0, l1 = 0.0;
    for (double x : s) sum += x, l1 += std::abs(x);
    EXPECT_NEAR(sum, 0.0, 1e-10);
    EXPECT_NEAR(l1, 1.0, 1e-10);
    const double a = std::exp(rng.normal()), b = rng.normal() * 10;
    for (double& x : r) x = a * x + b;
    const auto s2 = canonicalize_l1(r);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], s2[i], 1e-10);
  }
}

TEST(Starc, Examples) {
  const std::vector<double> r = {0.3, -1.2, 2.5, 0.0, 4.1};
  std::vector<double> neg(r.size()), aff(r.size());
  std::transform(r.begin(), r.end(), neg.begin(), [](double x) { return -x; });
  std::transform(r.begin(), r.end(), aff.begin(), [](double x) { return 3.5 * x - 7.0; });
  EXPECT_EQ(starc_l1(r, r), 0.0);
  EXPECT_NEAR(starc_l1(neg, r), 2.0, 1e-12);
  EXPECT_NEAR(starc_l1(aff, r), 0.0, 1e-12);
  EXPECT_THROW(starc_l1(r, std::vector<double>{1.0, 2.0}), std::invalid_argument);
  EXPECT_THROW(starc_l1(r, std::vector<double>(5, 1.0)), DegenerateError);
}

TEST(Starc, RangeSymmetryTriangle) {
  Rng rng(2);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 2 + rng.below(8);
    const auto x = random_vector(rng, n), y = random_vector(rng, n), z = random_vector(rng, n);
    const double xy = starc_l1(x, y);
    EXPECT_GE(xy, 0.0);
    EXPECT_LE(xy, 2.0 + 1e-12);
    EXPECT_NEAR(xy, starc_l1(y, x), 1e-12);
    EXPECT_LE(xy, starc_l1(x, z) + starc_l1(z, y) + 1e-12);
  }
}

TEST(StarcAffine, Examples) {
  const std::vector<double> gt = {1.0, -2.0, 0.5, 3.0};
  std::vector<double> hat(gt.size());
  std::transform(gt.begin(), gt.end(), hat.begin(), [](double x) { return 2.0 * x + 3.0; });
  EXPECT_NEAR(starc_affine(hat, gt), 0.0, 1e-24);
  EXPECT_NEAR(starc_affine(gt, gt), 0.0, 1e-24);
  const auto fit = affine_fit(hat, gt);
  EXPECT_NEAR(fit.a, 2.0, 1e-12);
  EXPECT_NEAR(fit.b, 3.0, 1e-12);
  EXPECT_FALSE(fit.clamped);
}

TEST(StarcAffine, ZeroCovarianceClampsSlope) {
  // hat is orthogonal to the centred gt, so the least-squares slope is 0.
  const std::vector<double> gt = {1.0, 2.0, 3.0, 4.0};
  const std::vector<double> hat = {1.0, -1.0, -1.0, 1.0};
  const auto fit = affine_fit(hat, gt);
  EXPECT_TRUE(fit.clamped);
  EXPECT_EQ(fit.a, kDegenerateEps);
  EXPECT_NEAR(fit.mse, 1.0, 1e-12);  // population variance of hat
  EXPECT_THROW(starc_affine(hat, std::vector<double>(4, 2.0)), DegenerateError);
}

TEST(Threshold, Examples) {
  const std::vector<Label> y = {-1, 1};
  const auto t = select_threshold(std::vector<double>{-1.0, 1.0}, y);
  EXPECT_EQ(t.threshold, 0.0);
  EXPECT_EQ(t.accuracy, 1.0);

  const std::vector<Label> y4 = {-1, -1, 1, 1};
  EXPECT_EQ(select_threshold(std::vector<double>{3.0, 4.0, 1.0, 2.0}, y4).accuracy, 0.5);

  const std::vector<Label> y3 = {1, 1, -1};
  const auto flat = select_threshold(std::vector<double>{0.5, 0.5, 0.5}, y3);
  EXPECT_NEAR(flat.accuracy, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(flat.threshold, -std::numeric_limits<double>::infinity());

  EXPECT_THROW(select_threshold(std::vector<double>{1.0, 2.0}, std::vector<Label>{1, 1}), std::invalid_argument);
}

TEST(Threshold, OptimalAgainstBruteForce) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(30);
    std::vector<double> s(n);
    std::vector<Label> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(6));  // ties on purpose
      y[i] = rng.bernoulli(0.5) ? 1 : -1;
    }
    y[0] = 1;
    y[1] = -1;
    const auto best = select_threshold(s, y);
    EXPECT_NEAR(best.accuracy, accuracy_at(s, y, best.threshold), 1e-15);
    for (double t = -1.0; t <= 7.0; t += 0.25) EXPECT_LE(accuracy_at(s, y, t), best.accuracy + 1e-15);
  }
}

TEST(Classification, PerfectSeparation) {
  const std::vector<double> s = {-2, -1, 1, 2};
  const std::vector<Label> y = {-1, -1, 1, 1};
  const auto m = classification_metrics(s, y, 0.0);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.f1, 1.0);
  EXPECT_EQ(m.auc, 1.0);
  EXPECT_THROW(roc_auc(s, std::vector<Label>(4, 1)), std::invalid_argument);
}

TEST(Classification, RandomScoresGiveChanceAuc) {
  Rng rng(5);
  std::vector<double> s(1000);
  std::vector<Label> y(1000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.normal();
    y[i] = rng.bernoulli(0.5) ? 1 : -1;
  }
  EXPECT_NEAR(roc_auc(s, y), 0.5, 0.05);
}

TEST(Classification, AucMatchesPairwiseOracleAndIsRankInvariant) {
  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng.below(499);
    std::vector<double> s(n);
    std::vector<Label> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(20)) + (rng.bernoulli(0.5) ? rng.uniform() : 0.0);
      y[i] = rng.bernoulli(0.4) ? 1 : -1;
    }
    y[0] = 1;
    y[1] = -1;
    const double auc = roc_auc(s, y);
    EXPECT_NEAR(auc, auc_oracle(s, y), 1e-12);
    std::vector<double> t(n);
    std::transform(s.begin(), s.end(), t.begin(), [](double x) { return std::exp(0.3 * x) - 4.0; });
    EXPECT_NEAR(roc_auc(t, y), auc, 1e-12);
  }
}

TEST(Classification, F1HandExample) {
  // predictions at threshold 0: + + - -  ; labels + - + -  -> tp 1, fp 1, fn 1
  const auto m = classification_metrics(std::vector<double>{1, 2, -1, -2}, std::vector<Label>{1, -1, 1, -1}, 0.0);
  EXPECT_DOUBLE_EQ(m.f1, 0.5);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
}

TEST(PairAccuracy, TiesAreIncorrect) {
  EXPECT_DOUBLE_EQ(pair_accuracy(std::vector<double>{1.0, 0.0, -1.0, 2.0}), 0.5);
}

namespace {

// Five pairs on a 1-D linear model R(h) = h; deltas 1.0, -0.5, 0.05, -2.0, 3.0.
struct SliceFixture {
  Dataset ds;
  DualPathRewardModel model{1, HeadKind::linear};
  SliceFixture() {
    ds = fairl::testing::make_dataset(1, {{1.0f}, {0.0f}, {0.0f}, {0.5f}, {0.05f}, {0.0f}, {-1.0f}, {1.0f},
                                          {2.0f}, {-1.0f}});
    const Label pos[] = {1, 1, 1, 1, 1}, neg[] = {-1, -1, -1, -1, -1};
    for (std::size_t i = 0; i < 5; ++i) {
      ds.pairs[i].pos_label = pos[i];
      ds.pairs[i].neg_label = neg[i];
    }
    model.theta(Path::base)[0] = 1.0;
  }
};

}  // namespace

TEST(Slice, HandBuiltMembership) {
  SliceFixture f;
  const auto deltas = margins(f.model, f.ds.pairs, *f.ds.embeddings);
  for (double gamma : {0.0, 0.1, 1.0, 2.5}) {
    const auto rep = failure_slice_metrics(f.model, *f.ds.embeddings, f.ds.pairs, gamma, 0.0);
    std::vector<std::size_t> want;
    for (std::size_t i = 0; i < deltas.size(); ++i)
      if (deltas[i] <= 0.0 || std::abs(deltas[i]) <= gamma) want.push_back(i);
    EXPECT_EQ(rep.members, want) << gamma;
    EXPECT_GE(rep.members.size(), 2u);
    EXPECT_EQ(rep.n_misclassified, 2u);
  }
}

TEST(Slice, InfiniteGammaMatchesGlobal) {
  SliceFixture f;
  const auto rep = failure_slice_metrics(f.model, *f.ds.embeddings, f.ds.pairs,
                                         std::numeric_limits<double>::infinity(), 0.25);
  ASSERT_EQ(rep.members.size(), 5u);
  EXPECT_DOUBLE_EQ(rep.pair_accuracy, pair_accuracy(margins(f.model, f.ds.pairs, *f.ds.embeddings)));
  const auto rows = labeled_rows(f.ds.pairs);
  const auto global = classification_metrics(score_rows(f.model, *f.ds.embeddings, rows.rows), rows.labels, 0.25);
  ASSERT_TRUE(rep.classification);
  EXPECT_EQ(rep.classification->accuracy, global.accuracy);
  EXPECT_EQ(rep.classification->auc, global.auc);
  EXPECT_EQ(rep.classification->f1, global.f1);
}

TEST(Slice, EmptyIsExplicit) {
  auto ds = fairl::testing::make_dataset(1, {{1.0f}, {0.0f}});
  DualPathRewardModel m(1, HeadKind::linear);
  m.theta(Path::base)[0] = 1.0;
  const auto rep = failure_slice_metrics(m, *ds.embeddings, ds.pairs, 0.0, 0.0);
  EXPECT_TRUE(rep.empty());
  EXPECT_FALSE(rep.classification);
  MetricsReport mr;
  mr.slice = rep;
  EXPECT_TRUE(mr.to_json()["slice"]["empty"].get<bool>());
}

TEST(Disagreement, Examples) {
  const std::vector<double> a = {2, 1, -1, -2};
  const std::vector<double> anti = {-2, -1, 1, 2};
  const std::vector<Label> y = {1, 1, -1, -1};
  const auto same = disagreement(a, a, y, 0.0, 0.0);
  EXPECT_EQ(same.overall.only_a_correct + same.overall.only_b_correct, 0u);
  const auto flip = disagreement(a, anti, y, 0.0, 0.0);
  EXPECT_EQ(flip.overall.only_a_correct, 4u);
  EXPECT_EQ(flip.overall.total(), 4u);
  const std::vector<std::string> tags = {"insult", "", "insult", "threat"};
  const auto by = disagreement(a, anti, y, 0.0, 0.0, tags);
  EXPECT_EQ(by.by_subtype.at("insult").only_a_correct, 2u);
  EXPECT_EQ(by.by_subtype.at("threat").only_a_correct, 1u);
  EXPECT_EQ(by.by_subtype.count(""), 0u);
  EXPECT_THROW(disagreement(a, std::vector<double>{1.0}, y, 0.0, 0.0), std::invalid_argument);
}

TEST(Disagreement, CountsPartition) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(100);
    auto a = random_vector(rng, n), b = random_vector(rng, n);
    std::vector<Label> y(n);
    for (auto& l : y) l = rng.bernoulli(0.5) ? 1 : -1;
    EXPECT_EQ(disagreement(a, b, y, rng.normal(), rng.normal()).overall.total(), n);
  }
}

TEST(Evaluate, GroundTruthModelIsPerfect) {
  auto [ds, gt] = gen_synthetic({.dim = 6, .n_pairs = 400, .seed = 3});
  auto [train, test] = split(ds, 0.25, 3);
  DualPathRewardModel m(6, HeadKind::linear);
  for (std::size_t j = 0; j < 6; ++j) m.theta(Path::base)[j] = gt.theta_star[j];
  const auto rep = evaluate_model(m, train, test, &gt, 0.08, "oracle");
  EXPECT_EQ(rep.test.accuracy, 1.0);
  EXPECT_EQ(rep.test.auc, 1.0);
  EXPECT_EQ(rep.test.f1, 1.0);
  EXPECT_EQ(rep.pair_accuracy, 1.0);
  EXPECT_NEAR(*rep.starc_l1, 0.0, 1e-6);
  EXPECT_NEAR(*rep.train_starc_l1, 0.0, 1e-6);
  const auto j = rep.to_json();
  EXPECT_EQ(j["method"], "oracle");
}
