#include "reference.hpp"

#include <latefit/attention.hpp>
#include <latefit/model.hpp>
#include <latefit/stats.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace latefit;

namespace {

Mat<double> random_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Mat<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

AttentionParams<double> random_attention(Rng& rng) {
  return {random_mat(rng, 32, 32, 0.4), random_mat(rng, 32, 32, 0.4), random_mat(rng, 32, 32, 0.4),
          random_mat(rng, 32, 32, 0.4), random_mat(rng, 1, 32, 0.1), 8};
}

ModelParams<double> small_model(std::uint64_t seed, std::size_t dim = 16) {
  ModelConfig cfg;
  cfg.backbone_dim = dim;
  auto p = init_params<double>(cfg, seed);
  Rng rng(seed + 99);
  for (auto& [n, t] : p.tensors()) {
    if (n.find(".b") != std::string::npos || n.find("categorical") != std::string::npos) {
      for (Eigen::Index i = 0; i < t->size(); ++i) t->data()[i] = rng.uniform(-0.1, 0.1);
    }
  }
  return p;
}

CacheEntry random_entry(Rng& rng, std::size_t n, std::size_t dim) {
  CacheEntry e;
  for (std::size_t i = 0; i < n; ++i) {
    e.section_ids.push_back(static_cast<std::uint16_t>(rng.index(4)));
    for (std::size_t k = 0; k < dim; ++k) e.vectors.push_back(static_cast<float>(rng.uniform(-1, 1)));
  }
  return e;
}

}  // namespace

TEST(Attention, MatchesDenseOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_attention(rng);
    const auto q = random_mat(rng, 1 + rng.index(6), 32);
    const auto kv = random_mat(rng, 1 + rng.index(6), 32);
    AttentionCache<double> cache;
    const auto out = cross_attention(q, kv, p, &cache);
    std::vector<ref::Matrix> weights;
    const auto expect = ref::attention(ref::to_matrix(q), ref::to_matrix(kv), p, &weights);
    ASSERT_EQ(out.rows(), q.rows());
    ASSERT_EQ(out.cols(), 32);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      for (Eigen::Index j = 0; j < 32; ++j) EXPECT_NEAR(out(i, j), expect[i][j], 1e-12);
    }
    for (std::size_t h = 0; h < 8; ++h) {
      for (Eigen::Index i = 0; i < q.rows(); ++i) {
        EXPECT_NEAR(cache.weights[h].row(i).sum(), 1.0, 1e-6);
        for (Eigen::Index j = 0; j < kv.rows(); ++j) EXPECT_NEAR(cache.weights[h](i, j), weights[h][i][j], 1e-12);
      }
    }
  }
}

TEST(Attention, SingleKeyIgnoresQueries) {
  Rng rng(2);
  const auto p = random_attention(rng);
  const auto kv = random_mat(rng, 1, 32);
  const Mat<double> expected = (kv * p.Wv) * p.Wo + p.bo;
  const auto out = cross_attention(random_mat(rng, 5, 32), kv, p);
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_LT((out.row(i) - expected.row(0)).norm(), 1e-12);
}

TEST(Attention, IdenticalKeysGiveIdenticalRows) {
  Rng rng(3);
  const auto p = random_attention(rng);
  const Mat<double> kv = random_mat(rng, 1, 32).replicate(4, 1);
  const auto q = random_mat(rng, 5, 32, 3.0);
  const auto out = cross_attention(q, kv, p);
  const auto expect = ref::attention(ref::to_matrix(q), ref::to_matrix(kv), p);
  for (Eigen::Index i = 1; i < 5; ++i) EXPECT_LT((out.row(i) - out.row(0)).norm(), 1e-12);
  EXPECT_NEAR(out(3, 7), expect[3][7], 1e-12);
}

TEST(Attention, Errors) {
  Rng rng(4);
  const auto p = random_attention(rng);
  try {
    cross_attention(Mat<double>(0, 32), random_mat(rng, 2, 32), p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptySequence);
  }
  auto q = random_mat(rng, 2, 32);
  q(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    cross_attention(q, random_mat(rng, 2, 32), p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteLogit);
  }
}

TEST(Similarity, Examples) {
  Rng rng(5);
  const auto a = random_mat(rng, 4, 32);
  for (double v : similarity_distribution(a, a)) EXPECT_NEAR(v, 1.0, 1e-12);

  Mat<double> x = Mat<double>::Zero(2, 32), y = Mat<double>::Zero(2, 32);
  x(0, 0) = 1;
  y(0, 1) = 2;
  x(1, 3) = -1;
  y(1, 3) = 0;  // zero-norm context row
  auto s = similarity_distribution(x, y);
  EXPECT_EQ(s[0], 0.0);
  EXPECT_EQ(s[1], 0.0);

  y(0, 1) = 0;
  y(0, 0) = -1;
  EXPECT_EQ(similarity_distribution(x, y)[0], -1.0);

  try {
    similarity_distribution(x, Mat<double>(Mat<double>::Zero(3, 32)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LengthMismatch);
  }
}

TEST(Describe, HandValues) {
  const std::vector<double> one{0.5};
  const auto a = describe(one).as_array();
  EXPECT_EQ(a, (std::array<double, 6>{0.5, 0.5, 0.5, 0, 0, 0}));

  const std::vector<double> two{0.0, 1.0};
  const auto b = describe(two).as_array();
  const std::array<double, 6> expect{0, 1, 0.5, 0.5, 0, 1};
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(b[i], expect[i], 1e-15);

  try {
    describe(std::vector<double>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyDistribution);
  }
}

TEST(Describe, BruteForceOracle) {
  Rng rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> s(1 + rng.index(40));
    const bool constant = trial % 10 == 0;
    for (auto& v : s) v = constant ? 0.3 : rng.uniform(-1, 1);
    const auto got = describe(s).as_array();
    const auto want = ref::describe(s);
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(got[i], want[i], 1e-9) << "field " << i;
    EXPECT_LE(got[0], got[2]);
    EXPECT_LE(got[2], got[1]);
  }
}

TEST(Mlp, WidthAndZeroNetwork) {
  ModelConfig cfg;
  EXPECT_EQ(cfg.mlp_input(), 140u);
  auto p = ModelParams<double>::zeros(cfg);
  p.mlp.b.back()(0, 0) = 0.37;
  Rng rng(7);
  const auto Ep = random_mat(rng, 3, 32), Ef = random_mat(rng, 2, 32);
  EXPECT_EQ(score_pair(Ep, Ef, p), 0.37);
}

TEST(Model, ParameterCount) {
  const auto p = ModelParams<float>::zeros(ModelConfig{});
  // two branches (W 384x32, b 32, categorical 4x384), two attention blocks
  // (4 x 32x32 + 32), MLP 140-256-128-256-1
  const std::size_t branch = 384 * 32 + 32 + 4 * 384;
  const std::size_t attn = 4 * 32 * 32 + 32;
  const std::size_t mlp = 140 * 256 + 256 + 256 * 128 + 128 + 128 * 256 + 256 + 256 + 1;
  EXPECT_EQ(p.parameter_count(), 2 * branch + 2 * attn + mlp);
  EXPECT_GE(p.parameter_count(), 120000u);
  EXPECT_LE(p.parameter_count(), 150000u);
}

TEST(Model, ScorePairMatchesReference) {
  const auto p = small_model(11);
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const auto eb = random_entry(rng, 1 + rng.index(5), 16);
    const auto ef = random_entry(rng, 1 + rng.index(5), 16);
    const double got = score_pair(project(eb, p.brief), project(ef, p.profile), p);
    const double want = ref::score_pair(ref::project(eb, p.brief), ref::project(ef, p.profile), p);
    EXPECT_NEAR(got, want, 1e-10);
  }
}

TEST(Model, GoldenScore) {
  const auto p = small_model(2024);
  Rng rng(2024);
  const auto eb = random_entry(rng, 3, 16);
  const auto ef = random_entry(rng, 4, 16);
  const double got = score_pair(project(eb, p.brief), project(ef, p.profile), p);
  const double want = ref::score_pair(ref::project(eb, p.brief), ref::project(ef, p.profile), p);
  EXPECT_NEAR(got, want, 1e-10);
  EXPECT_NEAR(got, -0.098823931848000743, 1e-9);
}

TEST(Model, PermutationInvariance) {
  const auto p = small_model(12);
  Rng rng(9);
  const auto Ep = project(random_entry(rng, 3, 16), p.brief);
  const auto Ef = project(random_entry(rng, 3, 16), p.profile);
  const double base = score_pair(Ep, Ef, p);
  std::array<int, 3> pi{0, 1, 2};
  int checked = 0;
  do {
    std::array<int, 3> pj{0, 1, 2};
    do {
      Mat<double> A(3, 32), B(3, 32);
      for (int i = 0; i < 3; ++i) {
        A.row(i) = Ep.row(pi[i]);
        B.row(i) = Ef.row(pj[i]);
      }
      EXPECT_NEAR(score_pair(A, B, p), base, 1e-6);
      ++checked;
    } while (std::next_permutation(pj.begin(), pj.end()));
  } while (std::next_permutation(pi.begin(), pi.end()));
  EXPECT_EQ(checked, 36);
}

TEST(Model, InferDeterministicTrainStochastic) {
  const auto p = small_model(13);
  Rng rng(10);
  const auto Ep = project(random_entry(rng, 3, 16), p.brief);
  const auto Ef = project(random_entry(rng, 2, 16), p.profile);
  EXPECT_EQ(score_pair(Ep, Ef, p), score_pair(Ep, Ef, p));
  Rng d1(1), d2(1), d3(2);
  const double t1 = score_pair(Ep, Ef, p, &d1);
  EXPECT_EQ(t1, score_pair(Ep, Ef, p, &d2));
  EXPECT_NE(t1, score_pair(Ep, Ef, p, &d3));
}

TEST(Model, CosinesStayInRange) {
  const auto p = small_model(14);
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto Ep = project(random_entry(rng, 1 + rng.index(6), 16), p.brief);
    const auto Ef = project(random_entry(rng, 1 + rng.index(6), 16), p.profile);
    PairCache<double> c;
    const auto f = pair_features(Ep, Ef, p, c);
    EXPECT_EQ(f.size(), 140);
    EXPECT_EQ(c.context_f.rows(), Ep.rows());
    EXPECT_EQ(c.context_p.rows(), Ef.rows());
    for (double v : c.sim_pf) EXPECT_LE(std::abs(v), 1.0 + 1e-9);
    for (double v : c.sim_fp) EXPECT_LE(std::abs(v), 1.0 + 1e-9);
  }
}

namespace {

struct Fixture {
  ModelParams<double> params = small_model(15);
  StubBackend backend{16, 1};
  EmbeddingCache cache;
  Document brief = build_document("p", DocKind::brief, {{"title", "Rust dev"}, {"skills", "rust, sql"}}, {});

  Fixture() {
    cache.dim = 16;
    update_cache(cache,
                 {build_document("f1", DocKind::profile, {{"title", "Rust person"}, {"skills", "rust"}}, {}),
                  build_document("f2", DocKind::profile, {{"title", "Cook"}, {"skills", "pasta"}}, {}),
                  build_document("f3", DocKind::profile, {{"title", "Rust person"}, {"skills", "rust"}}, {})},
                 backend);
  }
};

}  // namespace

TEST(ScoreBatch, SingletonTieBreakAndPairwiseOracle) {
  Fixture fx;
  const auto one = score_batch(fx.brief, {"f2"}, fx.cache, fx.backend, fx.params);
  ASSERT_EQ(one.size(), 1u);

  const auto all = score_batch(fx.brief, {"f3", "f2", "f1"}, fx.cache, fx.backend, fx.params);
  ASSERT_EQ(all.size(), 3u);
  const auto Ep = encode_document(fx.brief, fx.backend, fx.params.brief);
  for (const auto& r : all) {
    const auto Ef = encode_cached(r.profile_id, fx.cache, fx.params.profile);
    EXPECT_EQ(r.score, score_pair(Ep, Ef, fx.params));
  }
  for (std::size_t i = 1; i < all.size(); ++i) EXPECT_GE(all[i - 1].score, all[i].score);
  // f1 and f3 have identical content, hence equal scores, listed by id
  std::vector<std::string> tied;
  for (const auto& r : all) {
    if (r.profile_id != "f2") tied.push_back(r.profile_id);
  }
  EXPECT_EQ(tied, (std::vector<std::string>{"f1", "f3"}));

  try {
    score_batch(fx.brief, {"f1", "nope"}, fx.cache, fx.backend, fx.params);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CacheMiss);
  }
}
