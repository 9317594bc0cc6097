#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>

#include "fairl/data.hpp"
#include "fairl/error.hpp"
#include "support.hpp"

using namespace fairl;
using fairl::testing::TempDir;

namespace {

// Hand-assembled FAEM file: magic, u32 version, u32 d, u64 n, then f32 values, all little-endian.
std::string faem_bytes(std::uint32_t version, std::uint32_t d, std::uint64_t n, const std::vector<float>& values,
                       const char* magic = "FAEM") {
  std::string s(magic, 4);
  auto put = [&](std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  put(version, 4);
  put(d, 4);
  put(n, 8);
  for (float f : values) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put(u, 4);
  }
  return s;
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Embeddings, ReadsHandAssembledFile) {
  TempDir dir("emb");
  write_file(dir / "a.faem", faem_bytes(1, 2, 3, {1, 2, 3, 4, 5, 6}));
  const auto m = read_embeddings(dir / "a.faem");
  EXPECT_EQ(m.dim(), 2u);
  EXPECT_EQ(m.count(), 3u);
  EXPECT_EQ(m.row(2)[0], 5.0f);
  EXPECT_EQ(m.row(1)[1], 4.0f);
}

TEST(Embeddings, WriteMatchesHandAssembledBytes) {
  TempDir dir("emb");
  write_embeddings(dir / "a.faem", EmbeddingMatrix(2, std::vector<float>{1.5f, -2.0f, 0.25f, 8.0f}));
  std::ifstream in(dir / "a.faem", std::ios::binary);
  const std::string got((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(got, faem_bytes(1, 2, 2, {1.5f, -2.0f, 0.25f, 8.0f}));
}

TEST(Embeddings, RoundTripIsBitExact) {
  TempDir dir("emb");
  auto [ds, gt] = gen_synthetic({.dim = 5, .n_pairs = 40, .seed = 11});
  write_embeddings(dir / "e.faem", *ds.embeddings);
  EXPECT_EQ(read_embeddings(dir / "e.faem"), *ds.embeddings);
}

TEST(Embeddings, RejectsMalformedFiles) {
  TempDir dir("emb");
  write_file(dir / "short.faem", "FAEM\x01");
  EXPECT_NE(error_of([&] { read_embeddings(dir / "short.faem"); }).find("truncated header"), std::string::npos);

  write_file(dir / "magic.faem", faem_bytes(1, 2, 1, {1, 2}, "FAEN"));
  EXPECT_NE(error_of([&] { read_embeddings(dir / "magic.faem"); }).find("bad magic"), std::string::npos);

  write_file(dir / "version.faem", faem_bytes(2, 2, 1, {1, 2}));
  EXPECT_NE(error_of([&] { read_embeddings(dir / "version.faem"); }).find("version 2"), std::string::npos);

  // Header says d=3 but the payload holds 4 values.
  write_file(dir / "dim.faem", faem_bytes(1, 3, 1, {1, 2, 3, 4}));
  const auto dim_err = error_of([&] { read_embeddings(dir / "dim.faem"); });
  EXPECT_NE(dim_err.find("dimension mismatch"), std::string::npos);
  EXPECT_NE(dim_err.find("row 1"), std::string::npos);

  write_file(dir / "ragged.faem", faem_bytes(1, 2, 1, {1, 2}) + "\x01\x02");
  EXPECT_NE(error_of([&] { read_embeddings(dir / "ragged.faem"); }).find("whole number"), std::string::npos);

  write_file(dir / "nan.faem", faem_bytes(1, 2, 2, {1, 2, 3, std::numeric_limits<float>::quiet_NaN()}));
  EXPECT_NE(error_of([&] { read_embeddings(dir / "nan.faem"); }).find("row 1, column 1"), std::string::npos);

  EXPECT_THROW(read_embeddings(dir / "missing.faem"), std::runtime_error);
}

TEST(Pairs, RoundTripAndNulls) {
  TempDir dir("pairs");
  std::vector<PreferencePair> pairs = {{0, 1, Label{1}, Label{-1}, "insult"}, {2, 3, std::nullopt, std::nullopt, std::nullopt}};
  write_pairs(dir / "p.jsonl", pairs);
  EXPECT_EQ(read_pairs(dir / "p.jsonl"), pairs);
  std::ifstream in(dir / "p.jsonl");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, R"({"pos":0,"neg":1,"pos_label":1,"neg_label":-1,"subtype":"insult"})");
}

TEST(Pairs, DiagnosticsCarryLineNumbers) {
  TempDir dir("pairs");
  write_file(dir / "bad.jsonl", "{\"pos\":0,\"neg\":1}\n{\"pos\":0,\"neg\":1,\"pos_label\":2}\n");
  const auto err = error_of([&] { read_pairs(dir / "bad.jsonl"); });
  EXPECT_NE(err.find("line 2"), std::string::npos) << err;
  write_file(dir / "key.jsonl", "{\"pos\":0,\"neg\":1,\"weight\":3}\n");
  EXPECT_NE(error_of([&] { read_pairs(dir / "key.jsonl"); }).find("unknown key"), std::string::npos);
  write_file(dir / "json.jsonl", "{\"pos\":0,\n");
  EXPECT_THROW(read_pairs(dir / "json.jsonl"), FormatError);
  write_file(dir / "neg.jsonl", "{\"pos\":-1,\"neg\":1}\n");
  EXPECT_THROW(read_pairs(dir / "neg.jsonl"), FormatError);
}

TEST(Dataset, LoadChecksIndexRange) {
  TempDir dir("ds");
  write_file(dir / "e.faem", faem_bytes(1, 2, 2, {1, 2, 3, 4}));
  write_pairs(dir / "p.jsonl", std::vector<PreferencePair>{{0, 2, std::nullopt, std::nullopt, std::nullopt}});
  EXPECT_THROW(load_dataset(dir / "p.jsonl", dir / "e.faem"), FormatError);
  write_pairs(dir / "q.jsonl", std::vector<PreferencePair>{{1, 0, std::nullopt, std::nullopt, std::nullopt}});
  const auto ds = load_dataset(dir / "q.jsonl", dir / "e.faem");
  EXPECT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.pairs[0].pos, 1u);
}

TEST(Dataset, SaveLoadRoundTrip) {
  TempDir dir("ds");
  auto [ds, gt] = gen_synthetic({.dim = 4, .n_pairs = 25, .pair_mix = 0.4, .seed = 2});
  save_dataset(ds, dir / "p.jsonl", dir / "e.faem");
  const auto back = load_dataset(dir / "p.jsonl", dir / "e.faem");
  EXPECT_EQ(back.pairs, ds.pairs);
  EXPECT_EQ(*back.embeddings, *ds.embeddings);
  write_ground_truth(dir / "gt.json", gt);
  const auto gt2 = read_ground_truth(dir / "gt.json");
  EXPECT_EQ(gt2.theta_star, gt.theta_star);
  EXPECT_EQ(gt2.bias_star, gt.bias_star);
}

TEST(Synthetic, AllTnNoiselessPairsAreOrdered) {
  auto [ds, gt] = gen_synthetic({.dim = 2, .n_pairs = 100, .pair_mix = 1.0, .noise = 0.0, .seed = 7});
  ASSERT_EQ(ds.size(), 100u);
  for (const auto& p : ds.pairs) {
    EXPECT_GT(gt.score(ds.embeddings->row(p.pos)), gt.score(ds.embeddings->row(p.neg)));
    EXPECT_EQ(p.pos_label, Label{1});
    EXPECT_EQ(p.neg_label, Label{-1});
  }
}

TEST(Synthetic, ZeroMixIsAllNonToxic) {
  auto [ds, gt] = gen_synthetic({.dim = 2, .n_pairs = 100, .pair_mix = 0.0, .seed = 7});
  const auto mix = pair_mix_stats(ds);
  EXPECT_EQ(mix.nt_to_nt, 100u);
  for (const auto& p : ds.pairs) {
    EXPECT_EQ(p.pos_label, Label{1});
    EXPECT_EQ(p.neg_label, Label{1});
    EXPECT_GT(gt.score(ds.embeddings->row(p.pos)), gt.score(ds.embeddings->row(p.neg)));
  }
}

TEST(Synthetic, BradleyTerryOrientationMatchesOracle) {
  const double beta = 0.5;
  auto [ds, gt] = gen_synthetic({.dim = 8, .n_pairs = 1000, .pair_mix = 0.5, .noise = beta, .seed = 3});
  double expected = 0.0;
  std::size_t agree = 0;
  for (const auto& p : ds.pairs) {
    const double a = gt.score(ds.embeddings->row(p.pos)), b = gt.score(ds.embeddings->row(p.neg));
    // The higher-reward row ends up as pos with probability sigmoid(|a - b| / beta).
    expected += 1.0 / (1.0 + std::exp(-std::abs(a - b) / beta));
    agree += a > b;
  }
  expected /= 1000.0;
  EXPECT_NEAR(static_cast<double>(agree) / 1000.0, expected, 0.05);
}

TEST(Synthetic, MixCountAndDeterminism) {
  auto [a, ga] = gen_synthetic({.dim = 3, .n_pairs = 400, .pair_mix = 0.25, .seed = 5});
  auto [b, gb] = gen_synthetic({.dim = 3, .n_pairs = 400, .pair_mix = 0.25, .seed = 5});
  EXPECT_EQ(pair_mix_stats(a).t_to_nt, 100u);
  EXPECT_EQ(pair_mix_stats(a).total(), 400u);
  EXPECT_EQ(a.pairs, b.pairs);
  EXPECT_EQ(*a.embeddings, *b.embeddings);
  EXPECT_EQ(ga.theta_star, gb.theta_star);
  // theta* on the unit sphere
  double n2 = 0;
  for (double v : ga.theta_star) n2 += v * v;
  EXPECT_NEAR(n2, 1.0, 1e-12);
}

TEST(Synthetic, LabelsAgreeWithGroundTruth) {
  auto [ds, gt] = gen_synthetic({.dim = 6, .n_pairs = 300, .pair_mix = 0.6, .noise = 0.7, .seed = 9});
  for (const auto& p : ds.pairs) {
    EXPECT_EQ(*p.pos_label, gt.label(ds.embeddings->row(p.pos)));
    EXPECT_EQ(*p.neg_label, gt.label(ds.embeddings->row(p.neg)));
  }
}

TEST(Synthetic, RejectsBadArguments) {
  EXPECT_THROW(gen_synthetic({.pair_mix = 1.5}), std::invalid_argument);
  EXPECT_THROW(gen_synthetic({.pair_mix = -0.1}), std::invalid_argument);
  EXPECT_THROW(gen_synthetic({.dim = 1}), std::invalid_argument);
}

TEST(Split, SizesDisjointDeterministic) {
  auto [ds, gt] = gen_synthetic({.dim = 2, .n_pairs = 100, .seed = 1});
  auto [tr, te] = split(ds, 0.2, 4);
  EXPECT_EQ(tr.size(), 80u);
  EXPECT_EQ(te.size(), 20u);
  std::set<std::size_t> seen;
  for (const auto& p : tr.pairs) seen.insert(p.pos);
  for (const auto& p : te.pairs) EXPECT_TRUE(seen.insert(p.pos).second);
  EXPECT_EQ(seen.size(), 100u);
  auto [tr2, te2] = split(ds, 0.2, 4);
  EXPECT_EQ(te.pairs, te2.pairs);
  EXPECT_EQ(tr.embeddings, ds.embeddings);
}

TEST(Split, OnePairIsAnError) {
  auto [ds, gt] = gen_synthetic({.dim = 2, .n_pairs = 1, .seed = 1});
  EXPECT_THROW(split(ds, 0.5, 0), std::invalid_argument);
  auto [ds2, gt2] = gen_synthetic({.dim = 2, .n_pairs = 10, .seed = 1});
  EXPECT_THROW(split(ds2, 0.0, 0), std::invalid_argument);
  EXPECT_THROW(split(ds2, 1.0, 0), std::invalid_argument);
}

TEST(MixStats, UnlabeledAndTransitions) {
  auto ds = fairl::testing::make_dataset(1, {{0}, {1}, {2}, {3}, {4}, {5}, {6}, {7}});
  ds.pairs = {{0, 1, std::nullopt, std::nullopt, std::nullopt},
              {2, 3, Label{1}, Label{-1}, std::nullopt},
              {4, 5, Label{-1}, Label{1}, std::nullopt},
              {6, 7, Label{-1}, Label{-1}, std::nullopt}};
  const auto m = pair_mix_stats(ds);
  EXPECT_EQ(m.unlabeled, 1u);
  EXPECT_EQ(m.t_to_nt, 1u);
  EXPECT_EQ(m.nt_to_t, 1u);
  EXPECT_EQ(m.t_to_t, 1u);
  EXPECT_EQ(m.total(), 4u);
}

TEST(LabeledRows, FirstAppearanceOrder) {
  auto ds = fairl::testing::make_dataset(1, {{0}, {1}, {2}});
  ds.pairs = {{2, 0, Label{1}, Label{-1}, std::nullopt}, {0, 1, Label{-1}, std::nullopt, std::nullopt}};
  const auto lr = labeled_rows(ds.pairs);
  EXPECT_EQ(lr.rows, (std::vector<std::size_t>{2, 0}));
  EXPECT_EQ(lr.labels, (std::vector<Label>{1, -1}));
  EXPECT_EQ(referenced_rows(ds.pairs), (std::vector<std::size_t>{2, 0, 1}));
}
