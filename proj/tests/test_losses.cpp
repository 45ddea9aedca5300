#include <latefit/losses.hpp>
#include <latefit/rng.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace latefit;

namespace {

ScoreGroup group(std::vector<double> t, std::vector<double> s, std::vector<std::optional<int>> labels = {}) {
  if (labels.empty()) labels.assign(t.size(), std::nullopt);
  return {std::move(t), std::move(s), std::move(labels)};
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::Usage;
}

}  // namespace

TEST(Mse, HandValues) {
  EXPECT_NEAR(loss_mse({group({0.8, 0.2}, {0.6, 0.4})}).value, 0.04, 1e-9);
  EXPECT_EQ(loss_mse({group({0.3, 0.7}, {0.3, 0.7})}).value, 0.0);
  // duplicating the batch keeps the mean
  EXPECT_NEAR(loss_mse({group({0.8, 0.2}, {0.6, 0.4}), group({0.8, 0.2}, {0.6, 0.4})}).value, 0.04, 1e-12);
  EXPECT_EQ(kind_of([] { loss_mse({}); }), ErrorKind::EmptyBatch);
}

TEST(MarginLabeled, HandValues) {
  // one relevant/non-relevant pair: teacher margin 0.6, student margin 0.1
  const auto g = group({0.8, 0.2}, {0.5, 0.4}, {1, 0});
  EXPECT_NEAR(loss_margin_mse_labeled({g}).value, 0.25, 1e-9);
  EXPECT_EQ(loss_margin_mse_labeled({group({0.8, 0.2}, {0.8, 0.2}, {1, 0})}).value, 0.0);
  // a project with only relevant records contributes nothing
  const auto only_pos = group({0.9, 0.7}, {0.1, 0.2}, {1, 1});
  EXPECT_NEAR(loss_margin_mse_labeled({g, only_pos}).value, 0.25, 1e-12);
  EXPECT_EQ(kind_of([&] { loss_margin_mse_labeled({only_pos}); }), ErrorKind::NoValidPairs);
  EXPECT_EQ(kind_of([] { loss_margin_mse_labeled({group({1, 0}, {0, 0})}); }), ErrorKind::NoValidPairs);
}

TEST(MarginRelaxed, HandValues) {
  EXPECT_NEAR(loss_margin_mse_relaxed({group({1, 0}, {0.5, 0.5})}).value, 1.0, 1e-9);
  EXPECT_NEAR(loss_margin_mse_relaxed({group({0.2, 0.9, 0.4}, {0.7, 1.4, 0.9})}).value, 0.0, 1e-12);
  // single-candidate projects are excluded
  EXPECT_NEAR(loss_margin_mse_relaxed({group({1, 0}, {0.5, 0.5}), group({0.4}, {0.0})}).value, 1.0, 1e-12);
  EXPECT_EQ(kind_of([] { loss_margin_mse_relaxed({group({0.4}, {0.0})}); }), ErrorKind::NoValidPairs);
}

TEST(MarginLabeled, AgreesWithRelaxedOnMatchingPairSet) {
  // with one relevant and one non-relevant candidate, the labeled pair set is
  // half the ordered pairs and each unordered pair contributes equally
  const auto g = group({0.9, 0.1}, {0.3, 0.6}, {1, 0});
  EXPECT_NEAR(loss_margin_mse_labeled({g}).value, loss_margin_mse_relaxed({g}).value, 1e-12);
}

TEST(Cmmd, HandValues) {
  EXPECT_NEAR(loss_cmmd({group({1, 0}, {0.5, 0.5})}).value, 1.25, 1e-9);
  EXPECT_EQ(loss_cmmd({group({0.6, 0.2}, {0.6, 0.2})}).value, 0.0);
  EXPECT_NEAR(loss_cmmd({group({0.6, 0.2, 0.8}, {0.7, 0.3, 0.9})}).value, 0.01, 1e-9);
}

TEST(Cmmd, ShiftBreaksInvariance) {
  Rng rng(1);
  for (double c : {-0.3, 0.05, 0.2}) {
    std::vector<double> t(5), s(5);
    for (auto& v : t) v = rng.uniform();
    for (std::size_t i = 0; i < 5; ++i) s[i] = t[i] + c;
    EXPECT_NEAR(loss_margin_mse_relaxed({group(t, s)}).value, 0.0, 1e-12);
    EXPECT_NEAR(loss_cmmd({group(t, s)}).value, c * c, 1e-12);
  }
}

TEST(Clid, HandValues) {
  EXPECT_NEAR(loss_clid({group({1, 0}, {0.5, 0.5})}).value, 0.3466, 1e-4);
  EXPECT_NEAR(loss_clid({group({1, 0}, {0.5, 0.5})}).value, std::log(2.0) / 2.0, 1e-9);
  for (std::size_t k : {2u, 3u, 7u}) {
    const std::vector<double> u(k, 0.5);
    EXPECT_NEAR(loss_clid({group(u, u)}).value, std::log(double(k)) / double(k), 1e-12);
  }
  EXPECT_EQ(kind_of([] { loss_clid({group({0, 0}, {0.5, 0.5})}); }), ErrorKind::DegenerateProject);
}

TEST(Clid, MatchedStudentIsMinimum) {
  Rng rng(2);
  std::vector<double> t{0.2, 0.6, 1.0, 0.4};
  double sum = 0;
  for (double v : t) sum += v;
  double entropy = 0;
  for (double v : t) entropy -= v / sum * std::log(v / sum);
  const double at_teacher = loss_clid({group(t, t)}).value;
  EXPECT_NEAR(at_teacher, entropy / 4.0, 1e-12);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(4);
    for (auto& v : s) v = rng.uniform(0.01, 1.0);
    EXPECT_GE(loss_clid({group(t, s)}).value, at_teacher - 1e-12);
  }
}

TEST(Clid, FloorHandlesNonPositiveScores) {
  const auto r = loss_clid({group({1, 0.5}, {-0.3, 0.5})});
  EXPECT_TRUE(std::isfinite(r.value));
  EXPECT_EQ(r.grad[0][0], 0.0);
}

TEST(AllLosses, NonNegativeAndGradientMatchesFiniteDifference) {
  Rng rng(3);
  for (auto kind : {LossKind::mse, LossKind::margin_mse_labeled, LossKind::margin_mse_relaxed, LossKind::cmmd,
                    LossKind::clid_mse}) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<ScoreGroup> groups;
      for (int p = 0; p < 3; ++p) {
        ScoreGroup g;
        for (int i = 0; i < 5; ++i) {
          const double t = 0.2 * double(rng.index(6));
          g.teacher.push_back(t);
          g.student.push_back(rng.uniform(0.05, 1.2));
          g.labels.push_back(i == 0 ? 1 : i == 1 ? 0 : int(t > 0.5));
        }
        g.teacher[0] = std::max(g.teacher[0], 0.6);
        groups.push_back(g);
      }
      const auto r = compute_loss(kind, groups);
      EXPECT_GE(r.value, 0.0);
      const double eps = 1e-6;
      for (std::size_t p = 0; p < groups.size(); ++p) {
        for (std::size_t i = 0; i < groups[p].size(); ++i) {
          auto up = groups, down = groups;
          up[p].student[i] += eps;
          down[p].student[i] -= eps;
          const double fd = (compute_loss(kind, up).value - compute_loss(kind, down).value) / (2 * eps);
          EXPECT_NEAR(r.grad[p][i], fd, 1e-7) << to_string(kind);
        }
      }
    }
  }
}

TEST(LossKind, ParseRoundTrip) {
  for (auto kind : {LossKind::mse, LossKind::margin_mse_labeled, LossKind::margin_mse_relaxed, LossKind::cmmd,
                    LossKind::clid_mse}) {
    EXPECT_EQ(parse_loss_kind(to_string(kind)), kind);
  }
  EXPECT_EQ(kind_of([] { parse_loss_kind("listnet"); }), ErrorKind::Usage);
}
